use ndarray::{Array3, Axis};

use super::ScoreVector;
use crate::error::{Error, Result};
use crate::scalar::{canonical_sum, Scalar};

/// How per-class variances across stochastic passes collapse to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceAggregation {
    #[default]
    Mean,
    Max,
}

/// Monte Carlo dropout uncertainty from a K x N x C stack of predictions.
///
/// Each class's population variance is taken over the K passes and the
/// per-class variances are reduced with `agg`. Values are sorted before
/// summation so the result does not depend on the order of the passes.
pub fn dropout_variance_score<T: Scalar>(
    stack: &Array3<T>,
    agg: VarianceAggregation,
) -> Result<ScoreVector<T>> {
    let (k, n, c) = stack.dim();
    if k < 2 {
        return Err(Error::InsufficientSamples { required: 2, got: k });
    }
    if c == 0 {
        return Err(Error::Shape("prediction stack has no classes".into()));
    }
    if stack.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("prediction stack must be finite".into()));
    }

    let kf = T::of(k as f64);
    let mut samples = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let item = stack.index_axis(Axis(1), i);
        let mut acc = match agg {
            VarianceAggregation::Mean => T::zero(),
            VarianceAggregation::Max => T::neg_infinity(),
        };
        for j in 0..c {
            samples.clear();
            samples.extend(item.column(j).iter().copied());
            let mean = canonical_sum(&mut samples) / kf;
            // samples are sorted now; constant columns are exactly zero
            let var = if samples[0] == samples[k - 1] {
                T::zero()
            } else {
                let mut sq: Vec<T> = samples.iter().map(|&v| (v - mean) * (v - mean)).collect();
                canonical_sum(&mut sq) / kf
            };
            acc = match agg {
                VarianceAggregation::Mean => acc + var,
                VarianceAggregation::Max => acc.max(var),
            };
        }
        scores.push(match agg {
            VarianceAggregation::Mean => acc / T::of(c as f64),
            VarianceAggregation::Max => acc,
        });
    }
    Ok(ScoreVector::from_vec_unchecked(scores))
}
