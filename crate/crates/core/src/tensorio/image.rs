//! 8-bit RGB PNG input and output.

use std::path::Path;

use image::{DynamicImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Height x width x 3 image with channel values nominally in `[0, 1]`,
/// stored interleaved (HWC, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape("image must be at least 1x1".into()));
        }
        if data.len() != height * width * Self::CHANNELS {
            return Err(Error::Shape(format!(
                "{height}x{width}x3 image needs {} values, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("image contains non-finite values".into()));
        }
        Ok(ImageTensor { height, width, data })
    }

    pub fn filled(height: usize, width: usize, v: T) -> Self {
        ImageTensor {
            height,
            width,
            data: vec![v; height * width * Self::CHANNELS],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * Self::CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * Self::CHANNELS + c] = v;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Clamps every value into `[0, 1]`.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.max(T::zero()).min(T::one());
        }
    }

    /// 8-bit quantisation used on write: `round(clamp(v, 0, 1) * 255)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let scale = T::of(255.0);
        self.data
            .iter()
            .map(|v| {
                let q = (v.max(T::zero()).min(T::one()) * scale).round();
                q.to_u8().unwrap_or(0)
            })
            .collect()
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        let scale = T::of(255.0);
        let data = bytes.iter().map(|&b| T::of(b as f64) / scale).collect();
        ImageTensor::new(height, width, data)
    }
}

pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(image::ImageFormat::Png) => {}
        other => {
            return Err(Error::UnsupportedImage(format!(
                "{}: expected PNG, found {:?}",
                path.display(),
                other
            )))
        }
    }
    let decoded = reader
        .decode()
        .map_err(|e| Error::UnsupportedImage(format!("{}: {e}", path.display())))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(Error::UnsupportedImage(format!(
                "{}: expected 8-bit RGB, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = rgb.dimensions();
    ImageTensor::from_rgb8(h as usize, w as usize, rgb.as_raw())
}

pub fn write_image<T: Scalar>(path: impl AsRef<Path>, img: &ImageTensor<T>) -> Result<()> {
    let path = path.as_ref();
    let rgb = RgbImage::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
        .ok_or_else(|| Error::Shape("image buffer size mismatch".into()))?;
    rgb.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::UnsupportedImage(other.to_string()),
        })
}
