use ndarray::{Array2, Axis};

use super::{LogitMatrix, ProbMatrix, ProbMode, ScoreVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-wise softmax with the row maximum subtracted before exponentiation.
pub fn softmax<T: Scalar>(logits: &LogitMatrix<T>) -> ProbMatrix<T> {
    let mut out = logits.values().clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / total);
    }
    ProbMatrix {
        values: out,
        mode: ProbMode::Softmax,
    }
}

/// Element-wise logistic function, giving sigmoid-mode probabilities.
pub fn sigmoid<T: Scalar>(logits: &LogitMatrix<T>) -> ProbMatrix<T> {
    let values: Array2<T> = logits.values().mapv(|v| {
        if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        }
    });
    ProbMatrix {
        values,
        mode: ProbMode::Sigmoid,
    }
}

/// `-max_k p_k` per row. Only meaningful for mutually exclusive classes.
pub fn msp_score<T: Scalar>(probs: &ProbMatrix<T>) -> Result<ScoreVector<T>> {
    probs.require_mode(ProbMode::Softmax, "MSP")?;
    Ok(ScoreVector::from_vec_unchecked(
        probs.rows().map(|r| -row_max(r.iter().copied())).collect(),
    ))
}

/// `-max_k logit_k` per row.
pub fn maxlogit_score<T: Scalar>(logits: &LogitMatrix<T>) -> ScoreVector<T> {
    ScoreVector::from_vec_unchecked(logits.rows().map(|r| -row_max(r.iter().copied())).collect())
}

/// `-mean_k logit_k` per row.
pub fn logitavg_score<T: Scalar>(logits: &LogitMatrix<T>) -> ScoreVector<T> {
    let c = T::of(logits.n_classes() as f64);
    ScoreVector::from_vec_unchecked(
        logits
            .rows()
            .map(|r| -(r.iter().copied().sum::<T>() / c))
            .collect(),
    )
}

/// Posterior probability of the background class.
pub fn background_score<T: Scalar>(
    probs: &ProbMatrix<T>,
    background_class: usize,
) -> Result<ScoreVector<T>> {
    if background_class >= probs.n_classes() {
        return Err(Error::Index {
            index: background_class,
            len: probs.n_classes(),
        });
    }
    Ok(ScoreVector::from_vec_unchecked(
        probs.values().column(background_class).to_vec(),
    ))
}

fn row_max<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::neg_infinity(), T::max)
}
