use std::path::Path;

use rand::Rng as _;

use super::conv::{conv_forward, ConvLayer, FeatureMap, KERNEL};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use crate::tensorio::{self, ArrayBuffer, ArrayData, ImageTensor};

/// Channel counts at each block boundary.
pub const CHANNEL_PLAN: [usize; 5] = [3, 16, 16, 16, 3];

/// Seed used to produce the bundled random weights.
pub const RANDOM_INIT_SEED: u64 = 20_200_701;

/// Hidden channels that carry a copy of an input colour.
const COPIES: usize = 15;

const BUNDLED_RANDOM: &[u8] = include_bytes!("../../assets/img2img_random.npy");

/// Small fixed-architecture image-to-image network: four 3x3 conv blocks with
/// identity activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Img2ImgNet<T> {
    blocks: Vec<ConvLayer<T>>,
}

fn empty_blocks<T: Scalar>() -> Vec<ConvLayer<T>> {
    CHANNEL_PLAN
        .windows(2)
        .map(|w| ConvLayer::zeros(w[0], w[1]))
        .collect()
}

impl<T: Scalar> Img2ImgNet<T> {
    /// Weights that reproduce the input exactly. Hidden channel `h < 15`
    /// carries colour `h % 3`, so each colour has five copies. Inner layers
    /// average two copies and the output layer averages two, all with weight
    /// one half, which keeps every sum exact.
    pub fn identity() -> Self {
        let half = T::of(0.5);
        let mut blocks = empty_blocks::<T>();
        let last = blocks.len() - 1;
        for (k, layer) in blocks.iter_mut().enumerate() {
            if k == 0 {
                for h in 0..COPIES {
                    let w = layer.widx(h, h % 3, 1, 1);
                    layer.weights[w] = T::one();
                }
            } else if k == last {
                for c in 0..3 {
                    for src in [c, c + 3] {
                        let w = layer.widx(c, src, 1, 1);
                        layer.weights[w] = half;
                    }
                }
            } else {
                for h in 0..COPIES {
                    for src in [h, (h + 3) % COPIES] {
                        let w = layer.widx(h, src, 1, 1);
                        layer.weights[w] = half;
                    }
                }
            }
        }
        Img2ImgNet { blocks }
    }

    /// Identity weights plus small uniform noise scaled by fan-in.
    pub fn seeded_random(seed: u64) -> Self {
        let mut rng = substream(seed, Stream::WeightInit);
        let mut net = Self::identity();
        for layer in &mut net.blocks {
            let a = 0.1 / ((layer.in_channels * KERNEL * KERNEL) as f64).sqrt();
            for w in &mut layer.weights {
                *w = *w + T::of(rng.random_range(-a..a));
            }
        }
        net
    }

    /// The random weights shipped with the crate.
    pub fn bundled_random() -> Self {
        let buf = tensorio::decode_npy(BUNDLED_RANDOM).expect("bundled weights are valid NPY");
        Self::from_buffer(&buf).expect("bundled weights match the channel plan")
    }

    pub fn param_count() -> usize {
        CHANNEL_PLAN
            .windows(2)
            .map(|w| w[0] * w[1] * KERNEL * KERNEL + w[1])
            .sum()
    }

    /// Rebuilds a network from `[w0, b0, w1, b1, ...]`.
    pub fn from_flat(values: &[T]) -> Result<Self> {
        if values.len() != Self::param_count() {
            return Err(Error::Shape(format!(
                "weight bundle needs {} values, got {}",
                Self::param_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("weight bundle contains non-finite values".into()));
        }
        let mut blocks = empty_blocks::<T>();
        let mut rest = values;
        for layer in &mut blocks {
            let (w, r) = rest.split_at(layer.weights.len());
            layer.weights.copy_from_slice(w);
            let (b, r) = r.split_at(layer.bias.len());
            layer.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(Img2ImgNet { blocks })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(Self::param_count());
        for layer in &self.blocks {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn from_buffer(buf: &ArrayBuffer) -> Result<Self> {
        if buf.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "weight bundle must be one-dimensional, got shape {:?}",
                buf.shape()
            )));
        }
        Self::from_flat(&buf.to_scalars::<T>()?)
    }

    pub fn to_buffer(&self) -> ArrayBuffer {
        let flat = self.to_flat().into_iter().map(|v| v.to_f64_lossless()).collect::<Vec<_>>();
        ArrayBuffer::new(vec![flat.len()], ArrayData::F64(flat)).expect("1-D buffer")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_buffer(&tensorio::read_array(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tensorio::write_array(path, &self.to_buffer())
    }

    pub fn blocks(&self) -> &[ConvLayer<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ConvLayer<T>] {
        &mut self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Undistorted pass. The result is not clamped.
    pub fn clean_forward(&self, img: &ImageTensor<T>) -> Result<FeatureMap<T>> {
        let mut x = FeatureMap::from_image(img);
        for layer in &self.blocks {
            x = conv_forward(&x, layer)?;
        }
        Ok(x)
    }
}
