//! Anomaly scorers over classifier outputs.
//!
//! Every scorer returns a [`ScoreVector`] where a higher score means more
//! anomalous. Negations that appear in the usual definitions (negative
//! maximum softmax probability, negative maximum logit) are applied here, so
//! downstream metrics never need to know which detector produced a score.

mod dropout;
mod kl;
mod posterior;
mod segmentation;
mod typicality;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use dropout::{dropout_variance_score, VarianceAggregation};
pub use kl::{kl_divergence, kl_score, kl_templates_fit, ClassTemplates, KL_FLOOR};
pub use posterior::{background_score, logitavg_score, maxlogit_score, msp_score, sigmoid, softmax};
pub use segmentation::{ae_recon_score, seg_scores, SegMethod, SegScoreMap};
pub use typicality::{
    typicality_build, typicality_score, TypicalityConfig, TypicalityDistance, TypicalityFallback,
    TypicalityMatrix,
};

/// N x C matrix of unnormalised class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> LogitMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::Shape(format!(
                "need at least 2 classes, got {}",
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("logits must be finite".into()));
        }
        Ok(LogitMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(rows_to_array(rows)?)
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn rows(&self) -> impl Iterator<Item = ArrayView1<'_, T>> {
        self.values.axis_iter(Axis(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbMode {
    /// Rows are distributions over mutually exclusive classes.
    Softmax,
    /// Entries are independent per-class probabilities (multi-label).
    Sigmoid,
}

/// N x C matrix of class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix<T> {
    values: Array2<T>,
    mode: ProbMode,
}

impl<T: Scalar> ProbMatrix<T> {
    pub fn new(values: Array2<T>, mode: ProbMode) -> Result<Self> {
        if values.ncols() < 1 {
            return Err(Error::Shape("probability matrix has no classes".into()));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::Validation("probabilities must lie in [0, 1]".into()));
        }
        if mode == ProbMode::Softmax {
            let tol = row_sum_tolerance::<T>(values.ncols());
            for (i, row) in values.axis_iter(Axis(0)).enumerate() {
                let s: T = row.iter().copied().sum();
                if (s - T::one()).abs() > tol {
                    return Err(Error::Mode(format!(
                        "row {i} sums to {s}, softmax-mode rows must sum to 1"
                    )));
                }
            }
        }
        Ok(ProbMatrix { values, mode })
    }

    /// Picks softmax mode when every row sums to one, sigmoid otherwise.
    pub fn infer(values: Array2<T>) -> Result<Self> {
        match Self::new(values.clone(), ProbMode::Softmax) {
            Ok(m) => Ok(m),
            Err(Error::Mode(_)) => Self::new(values, ProbMode::Sigmoid),
            Err(e) => Err(e),
        }
    }

    pub fn from_rows(rows: &[Vec<T>], mode: ProbMode) -> Result<Self> {
        Self::new(rows_to_array(rows)?, mode)
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn mode(&self) -> ProbMode {
        self.mode
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn rows(&self) -> impl Iterator<Item = ArrayView1<'_, T>> {
        self.values.axis_iter(Axis(0))
    }

    pub(crate) fn require_mode(&self, mode: ProbMode, detector: &str) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Mode(format!(
                "{detector} requires {mode:?}-mode probabilities, got {:?}",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Tolerance for "row sums to one": 1e-6, widened for single precision on
/// wide rows.
fn row_sum_tolerance<T: Scalar>(n_classes: usize) -> T {
    let eps_bound = T::epsilon() * T::of(4.0 * n_classes as f64);
    eps_bound.max(T::of(1e-6))
}

/// Per-item anomaly scores, higher = more anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    scores: Vec<T>,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn new(scores: Vec<T>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("scores must be finite".into()));
        }
        Ok(ScoreVector { scores })
    }

    pub(crate) fn from_vec_unchecked(scores: Vec<T>) -> Self {
        ScoreVector { scores }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.scores
    }

    pub fn into_vec(self) -> Vec<T> {
        self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|v| v.to_f64_lossless()).collect()
    }
}

impl<T> std::ops::Index<usize> for ScoreVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.scores[i]
    }
}

fn rows_to_array<T: Scalar>(rows: &[Vec<T>]) -> Result<Array2<T>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape("rows have differing lengths".into()));
    }
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| Error::Shape(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logits_need_two_classes_and_finite_values() {
        assert!(matches!(LogitMatrix::from_rows(&[vec![1.0f64]]), Err(Error::Shape(_))));
        assert!(matches!(
            LogitMatrix::from_rows(&[vec![1.0f64, f64::INFINITY]]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn prob_mode_inference() {
        let soft = ProbMatrix::infer(rows_to_array(&[vec![0.3f64, 0.7]]).unwrap()).unwrap();
        assert_eq!(soft.mode(), ProbMode::Softmax);
        let sig = ProbMatrix::infer(rows_to_array(&[vec![0.9f64, 0.8]]).unwrap()).unwrap();
        assert_eq!(sig.mode(), ProbMode::Sigmoid);
        assert!(ProbMatrix::infer(rows_to_array(&[vec![1.5f64, 0.8]]).unwrap()).is_err());
    }

    #[test]
    fn softmax_mode_rejects_unnormalised_rows() {
        assert!(matches!(
            ProbMatrix::from_rows(&[vec![0.9f64, 0.8]], ProbMode::Softmax),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matches!(
            LogitMatrix::from_rows(&[vec![1.0f64, 2.0], vec![1.0]]),
            Err(Error::Shape(_))
        ));
    }
}
