//! Classical outlier detectors fitted on in-distribution feature vectors.

mod blob;
mod iforest;
mod lof;

use ndarray::{Array2, ArrayView1, Axis};

use crate::detectors::LogitMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use iforest::{
    average_path_length, harmonic, iforest_fit, iforest_score, HeightLimit, IForestMode, IForestParams,
    IsolationForestModel, IsolationTree, TreeNode,
};
pub use lof::{lof_fit, lof_score, LofModel, DEFAULT_NEIGHBORS, LRD_EPSILON};

/// N x d matrix of finite feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Shape("features need at least one dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("features must be finite".into()));
        }
        Ok(FeatureMatrix {
            values: values.as_standard_layout().into_owned(),
        })
    }

    /// One-dimensional features, one value per item.
    pub fn from_column(values: Vec<T>) -> Result<Self> {
        let n = values.len();
        Self::new(Array2::from_shape_vec((n, 1), values).expect("n x 1"))
    }

    /// The maximum logit of each item as a 1-D feature.
    pub fn max_logit(logits: &LogitMatrix<T>) -> Self {
        let col: Vec<T> = logits
            .rows()
            .map(|r| r.iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        Self::from_column(col).expect("logits are finite")
    }

    /// Every logit as a feature, one dimension per class.
    pub fn all_logits(logits: &LogitMatrix<T>) -> Self {
        Self::new(logits.values().clone()).expect("logits are finite")
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.index_axis(Axis(0), i)
    }

    pub(crate) fn row_slice(&self, i: usize) -> &[T] {
        let d = self.dim();
        &self.values.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }
}
