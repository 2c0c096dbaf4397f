use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::ImageTensor;

/// Channel-major (CHW) activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{channels}x{height}x{width} feature map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(FeatureMap { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_image(img: &ImageTensor<T>) -> Self {
        let (h, w) = (img.height(), img.width());
        let mut data = vec![T::zero(); 3 * h * w];
        for (p, px) in img.as_slice().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * h * w + p] = px[c];
            }
        }
        FeatureMap { channels: 3, height: h, width: w, data }
    }

    /// Interleaves a three-channel map back into an image without clamping.
    pub fn to_image(&self) -> Result<ImageTensor<T>> {
        if self.channels != 3 {
            return Err(Error::Shape(format!("expected 3 channels, got {}", self.channels)));
        }
        let plane = self.height * self.width;
        let mut out = vec![T::zero(); 3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                out[3 * p + c] = self.data[c * plane + p];
            }
        }
        ImageTensor::new(self.height, self.width, out)
    }

    pub fn channels(&self) -> usize {
        self.channels
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

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub(crate) fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// 3x3, stride 1, zero-padded convolution layer. Weights are laid out as
/// `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        ConvLayer {
            in_channels,
            out_channels,
            weights: vec![T::zero(); in_channels * out_channels * TAPS],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * KERNEL + ky) * KERNEL + kx
    }

    pub fn filter(&self, o: usize) -> &[T] {
        let n = self.in_channels * TAPS;
        &self.weights[o * n..(o + 1) * n]
    }

    pub fn filter_mut(&mut self, o: usize) -> &mut [T] {
        let n = self.in_channels * TAPS;
        &mut self.weights[o * n..(o + 1) * n]
    }

    /// The 3x3 kernel connecting input `i` to output `o`.
    pub fn kernel_mut(&mut self, o: usize, i: usize) -> &mut [T] {
        let s = self.widx(o, i, 0, 0);
        &mut self.weights[s..s + TAPS]
    }
}

/// Cross-correlation plus bias. Output spatial size equals the input's.
pub fn conv_forward<T: Scalar>(input: &FeatureMap<T>, layer: &ConvLayer<T>) -> Result<FeatureMap<T>> {
    if input.channels != layer.in_channels {
        return Err(Error::Shape(format!(
            "layer expects {} input channels, feature map has {}",
            layer.in_channels, input.channels
        )));
    }
    let (h, w) = (input.height, input.width);
    let plane = h * w;
    let mut out = FeatureMap::zeros(layer.out_channels, h, w);
    for o in 0..layer.out_channels {
        let dst = out.plane_mut(o);
        dst.fill(layer.bias[o]);
        for i in 0..layer.in_channels {
            let src = &input.data[i * plane..(i + 1) * plane];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wt = layer.weights[layer.widx(o, i, ky, kx)];
                    if wt == T::zero() {
                        continue;
                    }
                    // output (y, x) reads input (y + ky - 1, x + kx - 1)
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1).saturating_sub(ky).min(h);
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1).saturating_sub(kx).min(w);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let d = &mut dst[y * w + x0..y * w + x1];
                        let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (a, b) in d.iter_mut().zip(s) {
                            *a = *a + wt * *b;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
