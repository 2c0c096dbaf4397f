//! Little-endian helpers for the model blobs.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub(crate) struct BlobWriter {
    buf: Vec<u8>,
}

impl BlobWriter {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = BlobWriter { buf: magic.to_vec() };
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.write_u32::<LittleEndian>(v).expect("vec write");
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LittleEndian>(v).expect("vec write");
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).expect("vec write");
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct BlobReader<'a> {
    cur: Cursor<&'a [u8]>,
}

fn eof(_: std::io::Error) -> Error {
    Error::Format("model blob ends unexpectedly".into())
}

impl<'a> BlobReader<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 8], version: u32) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let mut m = [0u8; 8];
        cur.read_exact(&mut m).map_err(eof)?;
        if &m != magic {
            return Err(Error::Format("unrecognised model blob".into()));
        }
        let mut r = BlobReader { cur };
        let v = r.u32()?;
        if v != version {
            return Err(Error::Format(format!("unsupported model blob version {v}")));
        }
        Ok(r)
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(eof)
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LittleEndian>().map_err(eof)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LittleEndian>().map_err(eof)
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("count overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LittleEndian>().map_err(eof)
    }

    pub fn finish(self) -> Result<()> {
        if (self.cur.position() as usize) != self.cur.get_ref().len() {
            return Err(Error::Format("trailing bytes after model blob".into()));
        }
        Ok(())
    }
}
