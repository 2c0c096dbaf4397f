//! Array, image, table and manifest I/O.

mod csv;
mod image;
mod manifest;
mod npy;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use self::csv::{format_sig9, read_labels_csv, read_scores_csv, write_scores_csv, IdValue};
pub use self::image::{read_image, write_image, ImageTensor};
pub use self::manifest::{load_manifest, DatasetManifest, ManifestEntry, MANIFEST_VERSION};
pub use self::npy::{decode as decode_npy, encode as encode_npy, read_array, write_array, write_array_with, WriteOptions, MAX_DIMS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
    U8,
}

impl DType {
    pub fn descr(self) -> &'static str {
        match self {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
            DType::U8 => "|u1",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }

    fn from_descr(descr: &str) -> Result<Self> {
        match descr {
            "<f4" => Ok(DType::F32),
            "<f8" => Ok(DType::F64),
            "|u1" | "<u1" | "u1" => Ok(DType::U8),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
}

impl ArrayData {
    fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }
}

/// A dense row-major array of one to four dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayBuffer {
    shape: Vec<usize>,
    data: ArrayData,
}

impl ArrayBuffer {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        let buf = ArrayBuffer { shape, data };
        buf.validate()?;
        Ok(buf)
    }

    fn validate(&self) -> Result<()> {
        if self.shape.is_empty() || self.shape.len() > MAX_DIMS {
            return Err(Error::Format(format!(
                "arrays must have 1 to {MAX_DIMS} dimensions, got {}",
                self.shape.len()
            )));
        }
        let count: usize = self.shape.iter().product();
        if count != self.data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {count} elements but data has {}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            ArrayData::F32(_) => DType::F32,
            ArrayData::F64(_) => DType::F64,
            ArrayData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    fn byte_len(&self) -> usize {
        self.len() * self.dtype().size()
    }

    pub fn all_finite(&self) -> bool {
        match &self.data {
            ArrayData::F32(v) => v.iter().all(|x| x.is_finite()),
            ArrayData::F64(v) => v.iter().all(|x| x.is_finite()),
            ArrayData::U8(_) => true,
        }
    }

    /// Converts every element to `T`, failing on non-finite input.
    pub fn to_scalars<T: Scalar>(&self) -> Result<Vec<T>> {
        let out: Vec<T> = match &self.data {
            ArrayData::F32(v) => v.iter().map(|&x| T::of(x as f64)).collect(),
            ArrayData::F64(v) => v.iter().map(|&x| T::of(x)).collect(),
            ArrayData::U8(v) => v.iter().map(|&x| T::of(x as f64)).collect(),
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("array contains non-finite values".into()));
        }
        Ok(out)
    }

    pub fn to_ndarray<T: Scalar>(&self) -> Result<ArrayD<T>> {
        let v = self.to_scalars()?;
        ArrayD::from_shape_vec(IxDyn(&self.shape), v).map_err(|e| Error::Shape(e.to_string()))
    }

    /// Builds an `f64` buffer from any contiguous or strided ndarray view.
    pub fn from_scalars<T, S, D>(a: &ndarray::ArrayBase<S, D>) -> Result<Self>
    where
        T: Scalar,
        S: ndarray::Data<Elem = T>,
        D: ndarray::Dimension,
    {
        ArrayBuffer::new(
            a.shape().to_vec(),
            ArrayData::F64(a.iter().map(|x| x.to_f64_lossless()).collect()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_buffer() -> impl Strategy<Value = ArrayBuffer> {
        prop::collection::vec(1usize..5, 1..=4).prop_flat_map(|shape| {
            let n: usize = shape.iter().product();
            prop_oneof![
                prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), n)
                    .prop_map(ArrayData::F32),
                prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), n)
                    .prop_map(ArrayData::F64),
                prop::collection::vec(any::<u8>(), n).prop_map(ArrayData::U8),
            ]
            .prop_map(move |data| ArrayBuffer::new(shape.clone(), data).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn npy_round_trip_is_bit_exact(buf in arb_buffer()) {
            let bytes = encode_npy(&buf, WriteOptions::default()).unwrap();
            let back = decode_npy(&bytes).unwrap();
            prop_assert_eq!(&back, &buf);
            let again = encode_npy(&back, WriteOptions::default()).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }

    #[test]
    fn single_zero_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.npy");
        let buf = ArrayBuffer::new(vec![1], ArrayData::F64(vec![0.0])).unwrap();
        write_array(&p, &buf).unwrap();
        assert_eq!(read_array(&p).unwrap(), buf);
    }

    #[test]
    fn shape_count_mismatch_rejected() {
        assert!(matches!(
            ArrayBuffer::new(vec![2, 2], ArrayData::U8(vec![1, 2, 3])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_array("/nonexistent/x.npy"), Err(Error::Io { .. })));
    }
}
