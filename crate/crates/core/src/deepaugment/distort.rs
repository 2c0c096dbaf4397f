use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::conv::{conv_forward, FeatureMap, KERNEL};
use super::net::Img2ImgNet;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensorio::ImageTensor;

/// Per-op rates and ranges. Defaults follow the documented values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionParams {
    /// Probability that any single op joins a sampled subset.
    pub op_prob: f64,
    /// Fraction of filters negated by `negate_weights`.
    pub negate_rate: f64,
    /// Fraction of weights zeroed by `zero_weights`.
    pub zero_rate: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub dropout_rate: f64,
    pub negate_signal_rate: f64,
}

impl Default for DistortionParams {
    fn default() -> Self {
        DistortionParams {
            op_prob: 0.5,
            negate_rate: 0.1,
            zero_rate: 0.1,
            scale_min: 0.5,
            scale_max: 2.0,
            dropout_rate: 0.1,
            negate_signal_rate: 0.05,
        }
    }
}

impl DistortionParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("op_prob", self.op_prob),
            ("negate_rate", self.negate_rate),
            ("zero_rate", self.zero_rate),
            ("dropout_rate", self.dropout_rate),
            ("negate_signal_rate", self.negate_signal_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if !(self.scale_min.is_finite() && self.scale_max.is_finite())
            || self.scale_min <= 0.0
            || self.scale_min > self.scale_max
        {
            return Err(Error::Config(format!(
                "scale range must satisfy 0 < min <= max, got [{}, {}]",
                self.scale_min, self.scale_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum WeightOp {
    /// Negate every weight of a random subset of output filters.
    NegateWeights { rate: f64 },
    /// Zero individual weights at random.
    ZeroWeights { rate: f64 },
    /// Rotate each 3x3 kernel by 180 degrees and/or swap the in/out roles of
    /// square blocks.
    FlipTransposeWeights { flip_spatial: bool, transpose_channels: bool },
    /// Multiply one block's weights by a constant.
    ScaleWeights { block: usize, factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialAxis {
    Height,
    Width,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SignalOp {
    /// Zero activations at random, without rescaling the survivors.
    Dropout { rate: f64 },
    Gelu,
    NegateSignalRandomMask { rate: f64 },
    FlipSignal { axis: SpatialAxis },
}

/// Signal ops to apply after each block, indexed by block.
pub type SignalPlan = Vec<Vec<SignalOp>>;

/// A network's weight ops together with one forward pass's signal ops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub seed: u64,
    pub params: DistortionParams,
    pub weight_ops: Vec<WeightOp>,
    pub signal_ops: SignalPlan,
}

impl DistortionSpec {
    pub fn sample(seed: u64, n_blocks: usize, params: &DistortionParams) -> Self {
        let mut rng = crate::rng::substream(seed, crate::rng::Stream::Network(0));
        let weight_ops = sample_weight_distortions(&mut rng, n_blocks, params);
        let mut rng = crate::rng::substream(seed, crate::rng::Stream::Image(0));
        let signal_ops = sample_signal_distortions(&mut rng, n_blocks, params);
        DistortionSpec { seed, params: *params, weight_ops, signal_ops }
    }
}

/// Each weight op joins the subset independently with probability
/// `params.op_prob`, in fixed order, with its parameters drawn on inclusion.
pub fn sample_weight_distortions(rng: &mut Rng, n_blocks: usize, params: &DistortionParams) -> Vec<WeightOp> {
    let mut ops = Vec::new();
    if rng.random::<f64>() < params.op_prob {
        ops.push(WeightOp::NegateWeights { rate: params.negate_rate });
    }
    if rng.random::<f64>() < params.op_prob {
        ops.push(WeightOp::ZeroWeights { rate: params.zero_rate });
    }
    if rng.random::<f64>() < params.op_prob {
        let (flip_spatial, transpose_channels) = match rng.random_range(0..3u8) {
            0 => (true, false),
            1 => (false, true),
            _ => (true, true),
        };
        ops.push(WeightOp::FlipTransposeWeights { flip_spatial, transpose_channels });
    }
    if rng.random::<f64>() < params.op_prob && n_blocks > 0 {
        let block = rng.random_range(0..n_blocks);
        let factor = if params.scale_min == params.scale_max {
            params.scale_min
        } else {
            rng.random_range(params.scale_min..params.scale_max)
        };
        ops.push(WeightOp::ScaleWeights { block, factor });
    }
    ops
}

/// Samples one subset of signal ops for a forward pass, each op joining
/// independently with probability `params.op_prob`, then places every chosen
/// op after a different block. With more ops than blocks, placement falls
/// back to drawing blocks with replacement.
pub fn sample_signal_distortions(rng: &mut Rng, n_blocks: usize, params: &DistortionParams) -> SignalPlan {
    let mut chosen = Vec::new();
    if rng.random::<f64>() < params.op_prob {
        chosen.push(SignalOp::Dropout { rate: params.dropout_rate });
    }
    if rng.random::<f64>() < params.op_prob {
        chosen.push(SignalOp::Gelu);
    }
    if rng.random::<f64>() < params.op_prob {
        chosen.push(SignalOp::NegateSignalRandomMask { rate: params.negate_signal_rate });
    }
    if rng.random::<f64>() < params.op_prob {
        let axis = if rng.random::<bool>() { SpatialAxis::Height } else { SpatialAxis::Width };
        chosen.push(SignalOp::FlipSignal { axis });
    }
    let mut plan = vec![Vec::new(); n_blocks];
    if n_blocks == 0 {
        return plan;
    }
    let blocks: Vec<usize> = if chosen.len() <= n_blocks {
        rand::seq::index::sample(rng, n_blocks, chosen.len()).into_vec()
    } else {
        (0..chosen.len()).map(|_| rng.random_range(0..n_blocks)).collect()
    };
    for (op, b) in chosen.into_iter().zip(blocks) {
        plan[b].push(op);
    }
    plan
}

/// Applies weight ops in order to a copy of `clean`. Biases are never touched.
pub fn apply_weight_distortions<T: Scalar>(
    clean: &Img2ImgNet<T>,
    ops: &[WeightOp],
    rng: &mut Rng,
) -> Result<Img2ImgNet<T>> {
    let mut net = clean.clone();
    let n_blocks = net.n_blocks();
    for op in ops {
        match *op {
            WeightOp::NegateWeights { rate } => {
                for layer in net.blocks_mut() {
                    for o in 0..layer.out_channels {
                        if rng.random::<f64>() < rate {
                            layer.filter_mut(o).iter_mut().for_each(|w| *w = -*w);
                        }
                    }
                }
            }
            WeightOp::ZeroWeights { rate } => {
                for layer in net.blocks_mut() {
                    for w in &mut layer.weights {
                        if rng.random::<f64>() < rate {
                            *w = T::zero();
                        }
                    }
                }
            }
            WeightOp::FlipTransposeWeights { flip_spatial, transpose_channels } => {
                for layer in net.blocks_mut() {
                    if flip_spatial {
                        for k in layer.weights.chunks_exact_mut(KERNEL * KERNEL) {
                            k.reverse();
                        }
                    }
                    if transpose_channels && layer.in_channels == layer.out_channels {
                        let n = layer.in_channels;
                        for o in 0..n {
                            for i in o + 1..n {
                                for t in 0..KERNEL * KERNEL {
                                    let a = layer.widx(o, i, 0, 0) + t;
                                    let b = layer.widx(i, o, 0, 0) + t;
                                    layer.weights.swap(a, b);
                                }
                            }
                        }
                    }
                }
            }
            WeightOp::ScaleWeights { block, factor } => {
                if block >= n_blocks {
                    return Err(Error::Index { index: block, len: n_blocks });
                }
                let f = T::of(factor);
                net.blocks_mut()[block].weights.iter_mut().for_each(|w| *w = *w * f);
            }
        }
    }
    Ok(net)
}

fn gelu<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    x * half * (T::one() + (x * T::FRAC_1_SQRT_2()).gauss_erf())
}

fn apply_signal_op<T: Scalar>(x: &mut FeatureMap<T>, op: &SignalOp, rng: &mut Rng) {
    match *op {
        SignalOp::Dropout { rate } => {
            for v in x.as_mut_slice() {
                if rng.random::<f64>() < rate {
                    *v = T::zero();
                }
            }
        }
        SignalOp::Gelu => x.as_mut_slice().iter_mut().for_each(|v| *v = gelu(*v)),
        SignalOp::NegateSignalRandomMask { rate } => {
            for v in x.as_mut_slice() {
                if rng.random::<f64>() < rate {
                    *v = -*v;
                }
            }
        }
        SignalOp::FlipSignal { axis } => {
            let (h, w) = (x.height(), x.width());
            for c in 0..x.channels() {
                let plane = x.plane_mut(c);
                match axis {
                    SpatialAxis::Width => plane.chunks_exact_mut(w).for_each(|row| row.reverse()),
                    SpatialAxis::Height => {
                        for y in 0..h / 2 {
                            let (top, bottom) = plane.split_at_mut((h - 1 - y) * w);
                            top[y * w..(y + 1) * w].swap_with_slice(&mut bottom[..w]);
                        }
                    }
                }
            }
        }
    }
}

/// Forward pass with the plan's signal ops applied after each block; the
/// result is clamped to [0, 1].
pub fn deepaugment_forward<T: Scalar>(
    net: &Img2ImgNet<T>,
    img: &ImageTensor<T>,
    plan: &[Vec<SignalOp>],
    rng: &mut Rng,
) -> Result<ImageTensor<T>> {
    if plan.len() != net.n_blocks() {
        return Err(Error::Shape(format!(
            "signal plan covers {} blocks, network has {}",
            plan.len(),
            net.n_blocks()
        )));
    }
    let mut x = FeatureMap::from_image(img);
    for (layer, ops) in net.blocks().iter().zip(plan) {
        x = conv_forward(&x, layer)?;
        for op in ops {
            apply_signal_op(&mut x, op, rng);
        }
    }
    let mut out = x.to_image()?;
    out.clamp_unit();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    /// Smooth content plus texture around typical natural-image channel means.
    fn test_image(h: usize, w: usize) -> ImageTensor<f64> {
        let means = [0.485, 0.456, 0.406];
        let mut img = ImageTensor::filled(h, w, 0.0);
        for y in 0..h {
            for x in 0..w {
                let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
                let smooth = (3.0 * fx + 1.0).sin() * (2.0 * fy).cos();
                let texture = ((x * 7 + y * 13) % 5) as f64 / 4.0 - 0.5;
                for (c, m) in means.iter().enumerate() {
                    let v = m + 0.25 * smooth * (1.0 - 0.3 * c as f64) + 0.08 * texture;
                    img.set(y, x, c, v.clamp(0.0, 1.0));
                }
            }
        }
        img
    }

    fn no_ops(n: usize) -> SignalPlan {
        vec![Vec::new(); n]
    }

    #[test]
    fn identity_net_without_ops_is_exact() {
        let img = test_image(9, 11);
        let net = Img2ImgNet::identity();
        let out = deepaugment_forward(&net, &img, &no_ops(4), &mut substream(0, Stream::Image(0))).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = DistortionParams::default();
        assert_eq!(DistortionSpec::sample(9, 4, &p), DistortionSpec::sample(9, 4, &p));
        let mut rng = substream(9, Stream::Network(0));
        let specs: Vec<_> = (0..20).map(|_| sample_weight_distortions(&mut rng, 4, &p)).collect();
        assert!(specs.iter().any(|s| *s != specs[0]));
        let mut rng = substream(9, Stream::Image(0));
        let plans: Vec<_> = (0..20).map(|_| sample_signal_distortions(&mut rng, 4, &p)).collect();
        assert!(plans.iter().any(|s| *s != plans[0]));
    }

    #[test]
    fn op_frequencies_are_one_half() {
        let p = DistortionParams::default();
        let n = 10_000;
        let mut rng = substream(1, Stream::Network(0));
        let mut weight_counts = [0usize; 4];
        for _ in 0..n {
            for op in sample_weight_distortions(&mut rng, 4, &p) {
                let k = match op {
                    WeightOp::NegateWeights { .. } => 0,
                    WeightOp::ZeroWeights { .. } => 1,
                    WeightOp::FlipTransposeWeights { .. } => 2,
                    WeightOp::ScaleWeights { .. } => 3,
                };
                weight_counts[k] += 1;
            }
        }
        let mut rng = substream(1, Stream::Image(0));
        let mut signal_counts = [0usize; 4];
        for _ in 0..n {
            let plan = sample_signal_distortions(&mut rng, 4, &p);
            assert!(plan.iter().all(|ops| ops.len() <= 1));
            for op in plan.into_iter().flatten() {
                let k = match op {
                    SignalOp::Dropout { .. } => 0,
                    SignalOp::Gelu => 1,
                    SignalOp::NegateSignalRandomMask { .. } => 2,
                    SignalOp::FlipSignal { .. } => 3,
                };
                signal_counts[k] += 1;
            }
        }
        for c in weight_counts.iter().chain(&signal_counts) {
            let f = *c as f64 / n as f64;
            assert!((f - 0.5).abs() <= 0.02, "{weight_counts:?} {signal_counts:?}");
        }
    }

    #[test]
    fn sampled_parameters_stay_in_range() {
        let p = DistortionParams::default();
        let mut rng = substream(2, Stream::Network(0));
        for _ in 0..2000 {
            for op in sample_weight_distortions(&mut rng, 4, &p) {
                match op {
                    WeightOp::ScaleWeights { block, factor } => {
                        assert!(block < 4 && (0.5..2.0).contains(&factor));
                    }
                    WeightOp::FlipTransposeWeights { flip_spatial, transpose_channels } => {
                        assert!(flip_spatial || transpose_channels);
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn empty_weight_ops_leave_net_unchanged() {
        let net = Img2ImgNet::<f64>::bundled_random();
        let out = apply_weight_distortions(&net, &[], &mut substream(0, Stream::Network(0))).unwrap();
        assert_eq!(out, net);
    }

    #[test]
    fn double_full_negate_is_identity() {
        let net = Img2ImgNet::<f64>::bundled_random();
        let op = WeightOp::NegateWeights { rate: 1.0 };
        let mut rng = substream(0, Stream::Network(0));
        let once = apply_weight_distortions(&net, std::slice::from_ref(&op), &mut rng).unwrap();
        assert_ne!(once, net);
        let twice = apply_weight_distortions(&once, &[op], &mut rng).unwrap();
        assert_eq!(twice, net);
    }

    #[test]
    fn flip_transpose_is_an_involution() {
        let net = Img2ImgNet::<f64>::bundled_random();
        let op = WeightOp::FlipTransposeWeights { flip_spatial: true, transpose_channels: true };
        let mut rng = substream(0, Stream::Network(0));
        let once = apply_weight_distortions(&net, std::slice::from_ref(&op), &mut rng).unwrap();
        assert_ne!(once, net);
        assert_eq!(apply_weight_distortions(&once, &[op], &mut rng).unwrap(), net);
    }

    #[test]
    fn full_zero_leaves_bias_propagation() {
        let mut net = Img2ImgNet::<f64>::bundled_random();
        for (k, layer) in net.blocks_mut().iter_mut().enumerate() {
            layer.bias.iter_mut().enumerate().for_each(|(o, b)| *b = 0.01 * (k + o) as f64);
        }
        let zeroed = apply_weight_distortions(&net, &[WeightOp::ZeroWeights { rate: 1.0 }], &mut substream(0, Stream::Network(0))).unwrap();
        assert!(zeroed.blocks().iter().all(|l| l.weights.iter().all(|&w| w == 0.0)));
        let expected: Vec<f64> = (0..3).map(|o| 0.01 * (3 + o) as f64).collect();
        let plan = no_ops(4);
        for img in [test_image(5, 6), ImageTensor::filled(5, 6, 1.0)] {
            let out = deepaugment_forward(&zeroed, &img, &plan, &mut substream(0, Stream::Image(0))).unwrap();
            for px in out.as_slice().chunks_exact(3) {
                assert_eq!(px, expected.as_slice());
            }
        }
    }

    #[test]
    fn scale_out_of_range_block() {
        let net = Img2ImgNet::<f64>::identity();
        let r = apply_weight_distortions(&net, &[WeightOp::ScaleWeights { block: 9, factor: 1.0 }], &mut substream(0, Stream::Network(0)));
        assert!(matches!(r, Err(Error::Index { .. })));
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(-1.0f64) + 0.158_655_253_931_457_05).abs() < 1e-15);
        let img = ImageTensor::filled(3, 3, 0.0);
        let plan = vec![vec![SignalOp::Gelu]; 4];
        let out = deepaugment_forward(&Img2ImgNet::identity(), &img, &plan, &mut substream(0, Stream::Image(0))).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn double_flip_matches_no_flip() {
        let img = test_image(7, 5);
        let net = Img2ImgNet::bundled_random();
        for axis in [SpatialAxis::Height, SpatialAxis::Width] {
            let flip = SignalOp::FlipSignal { axis };
            let mut plan = no_ops(4);
            plan[1] = vec![flip.clone(), flip];
            let a = deepaugment_forward(&net, &img, &plan, &mut substream(0, Stream::Image(0))).unwrap();
            let b = deepaugment_forward(&net, &img, &no_ops(4), &mut substream(0, Stream::Image(0))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_flip_mirrors_identity_output() {
        let img = test_image(4, 5);
        let mut plan = no_ops(4);
        plan[3] = vec![SignalOp::FlipSignal { axis: SpatialAxis::Width }];
        let out = deepaugment_forward(&Img2ImgNet::identity(), &img, &plan, &mut substream(0, Stream::Image(0))).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                for c in 0..3 {
                    assert_eq!(out.get(y, x, c), img.get(y, 4 - x, c));
                }
            }
        }
        plan[3] = vec![SignalOp::FlipSignal { axis: SpatialAxis::Height }];
        let out = deepaugment_forward(&Img2ImgNet::identity(), &img, &plan, &mut substream(0, Stream::Image(0))).unwrap();
        assert_eq!(out.get(0, 2, 1), img.get(3, 2, 1));
    }

    #[test]
    fn plan_length_must_match() {
        let r = deepaugment_forward(&Img2ImgNet::<f64>::identity(), &test_image(2, 2), &no_ops(3), &mut substream(0, Stream::Image(0)));
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn params_validation() {
        assert!(DistortionParams::default().validate().is_ok());
        let bad = DistortionParams { dropout_rate: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = DistortionParams { scale_min: 3.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shape_range_and_bounded_distortion() {
        let img = test_image(16, 16);
        let p = DistortionParams::default();
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for seed in 0..200u64 {
            let net = if seed % 2 == 0 { Img2ImgNet::identity() } else { Img2ImgNet::bundled_random() };
            let mut rng = substream(seed, Stream::Network(0));
            let ops = sample_weight_distortions(&mut rng, 4, &p);
            let net = apply_weight_distortions(&net, &ops, &mut rng).unwrap();
            let mut rng = substream(seed, Stream::Image(0));
            let plan = sample_signal_distortions(&mut rng, 4, &p);
            let out = deepaugment_forward(&net, &img, &plan, &mut rng).unwrap();
            assert!(out.same_shape(&img));
            assert!(out.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            let mad = out.as_slice().iter().zip(img.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>()
                / img.as_slice().len() as f64;
            worst = worst.max(mad);
            total += mad;
        }
        assert!(worst < 0.5, "worst mean abs diff {worst}");
        assert!(total / 200.0 > 0.01);
    }
}
