//! NPY v1.0 reader and writer.
//!
//! Layout: magic `\x93NUMPY`, version bytes `01 00`, a little-endian `u16`
//! header length, then an ASCII dict literal padded with spaces and a
//! trailing newline so that the payload starts on a 64-byte boundary.
//! Only little-endian C-order arrays of 1 to 4 dimensions with dtype
//! `<f4`, `<f8` or `|u1` are accepted.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::{ArrayBuffer, ArrayData, DType};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;
pub const MAX_DIMS: usize = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Permit NaN and infinities in float payloads.
    pub allow_nonfinite: bool,
}

pub fn read_array(path: impl AsRef<Path>) -> Result<ArrayBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_array(path: impl AsRef<Path>, buf: &ArrayBuffer) -> Result<()> {
    write_array_with(path, buf, WriteOptions::default())
}

pub fn write_array_with(
    path: impl AsRef<Path>,
    buf: &ArrayBuffer,
    opts: WriteOptions,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(buf, opts)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode(buf: &ArrayBuffer, opts: WriteOptions) -> Result<Vec<u8>> {
    buf.validate()?;
    if !opts.allow_nonfinite && !buf.all_finite() {
        return Err(Error::Validation(
            "array contains non-finite values".to_string(),
        ));
    }

    let header = header_text(buf.dtype(), buf.shape());
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + buf.byte_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());

    match buf.data() {
        ArrayData::F32(v) => {
            let start = out.len();
            out.resize(start + v.len() * 4, 0);
            LittleEndian::write_f32_into(v, &mut out[start..]);
        }
        ArrayData::F64(v) => {
            let start = out.len();
            out.resize(start + v.len() * 8, 0);
            LittleEndian::write_f64_into(v, &mut out[start..]);
        }
        ArrayData::U8(v) => out.extend_from_slice(v),
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<ArrayBuffer> {
    if bytes.len() < PREAMBLE_LEN || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing NPY magic".into()));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::Format(format!(
            "unsupported NPY version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = LittleEndian::read_u16(&bytes[8..10]) as usize;
    let data_start = PREAMBLE_LEN + header_len;
    if bytes.len() < data_start {
        return Err(Error::Format("header extends past end of file".into()));
    }
    let header = std::str::from_utf8(&bytes[PREAMBLE_LEN..data_start])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let parsed = parse_header(header)?;

    if parsed.shape.is_empty() {
        return Err(Error::Format("scalar arrays are not supported".into()));
    }
    if parsed.shape.len() > MAX_DIMS {
        return Err(Error::Format(format!(
            "{} dimensions exceeds the maximum of {MAX_DIMS}",
            parsed.shape.len()
        )));
    }
    if parsed.fortran_order {
        return Err(Error::Format("fortran-order arrays are not supported".into()));
    }

    let count = parsed
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let expected = count * parsed.dtype.size();
    let payload = &bytes[data_start..];
    if payload.len() < expected {
        return Err(Error::Truncation {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }

    let data = match parsed.dtype {
        DType::F32 => {
            let mut v = vec![0f32; count];
            LittleEndian::read_f32_into(payload, &mut v);
            ArrayData::F32(v)
        }
        DType::F64 => {
            let mut v = vec![0f64; count];
            LittleEndian::read_f64_into(payload, &mut v);
            ArrayData::F64(v)
        }
        DType::U8 => ArrayData::U8(payload.to_vec()),
    };
    ArrayBuffer::new(parsed.shape, data)
}

fn header_text(dtype: DType, shape: &[usize]) -> String {
    let shape_str = match shape {
        [one] => format!("({one},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut h = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape_str
    );
    let unpadded = PREAMBLE_LEN + h.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    h.extend(std::iter::repeat_n(' ', pad));
    h.push('\n');
    h
}

struct Header {
    dtype: DType,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the restricted python dict literal numpy writes.
fn parse_header(text: &str) -> Result<Header> {
    let body = text.trim_end_matches(['\n', ' ', '\0']).trim();
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| Error::Format("header is not a dict literal".into()))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim_start();

    while !rest.is_empty() {
        let (key, after) = take_quoted(rest)?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::Format(format!("expected ':' after key '{key}'")))?
            .trim_start();
        let after = match key {
            "descr" => {
                let (v, a) = take_quoted(after)?;
                descr = Some(v.to_string());
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(Error::Format("fortran_order must be True or False".into()));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| Error::Format("shape must be a tuple".into()))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| Error::Format("unterminated shape tuple".into()))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L')
                            .parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad dimension '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(Error::Format(format!("unexpected header key '{other}'"))),
        };
        rest = after.trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err(Error::Format("expected ',' between header entries".into()));
        }
    }

    let descr = descr.ok_or_else(|| Error::Format("header lacks 'descr'".into()))?;
    let dtype = DType::from_descr(&descr)?;
    Ok(Header {
        dtype,
        fortran_order: fortran.ok_or_else(|| Error::Format("header lacks 'fortran_order'".into()))?,
        shape: shape.ok_or_else(|| Error::Format("header lacks 'shape'".into()))?,
    })
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let q = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format(format!("expected quoted string at '{s}'")))?;
    let inner = &s[1..];
    let end = inner
        .find(q)
        .ok_or_else(|| Error::Format("unterminated string in header".into()))?;
    Ok((&inner[..end], &inner[end + 1..]))
}
