//! Local outlier factor, novelty variant: queries are scored against a
//! fitted reference set and are never their own neighbours.
//!
//! The k-neighbourhood of a point holds every reference point within its
//! k-distance, so ties at the k-th distance can make it larger than `k`; sums
//! over a neighbourhood are divided by its actual size.

use rayon::prelude::*;

use super::blob::{BlobReader, BlobWriter};
use super::FeatureMatrix;
use crate::detectors::ScoreVector;
use crate::error::{Error, Result};
use crate::scalar::{canonical_sum, Scalar};

pub const DEFAULT_NEIGHBORS: usize = 20;
/// Lower bound on the mean reachability distance, keeping densities finite
/// when a point has at least `k` exact duplicates.
pub const LRD_EPSILON: f64 = 1e-10;

const BLOB_MAGIC: &[u8; 8] = b"OODLOF\0\0";
const BLOB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LofModel<T> {
    points: FeatureMatrix<T>,
    k: usize,
    kdist: Vec<T>,
    lrd: Vec<T>,
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// Indices and distances of the k-neighbourhood, plus the k-distance.
fn neighbourhood<T: Scalar>(
    points: &FeatureMatrix<T>,
    query: &[T],
    k: usize,
    exclude: Option<usize>,
) -> (T, Vec<(usize, T)>) {
    let mut dists: Vec<(usize, T)> = (0..points.n_items())
        .filter(|&j| Some(j) != exclude)
        .map(|j| (j, euclidean(query, points.row_slice(j))))
        .collect();
    let mut scratch: Vec<T> = dists.iter().map(|d| d.1).collect();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite"));
    let kdist = *kth;
    dists.retain(|d| d.1 <= kdist);
    (kdist, dists)
}

fn density<T: Scalar>(neigh: &[(usize, T)], kdist: &[T]) -> T {
    let mut reach: Vec<T> = neigh.iter().map(|&(j, d)| kdist[j].max(d)).collect();
    let mean = canonical_sum(&mut reach) / T::of(reach.len() as f64);
    T::one() / mean.max(T::of(LRD_EPSILON))
}

pub fn lof_fit<T: Scalar>(points: &FeatureMatrix<T>, k: usize) -> Result<LofModel<T>> {
    let n = points.n_items();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::Fit(format!("LOF with k = {k} needs more than {k} points, got {n}")));
    }
    let neigh: Vec<(T, Vec<(usize, T)>)> = (0..n)
        .into_par_iter()
        .map(|i| neighbourhood(points, points.row_slice(i), k, Some(i)))
        .collect();
    let kdist: Vec<T> = neigh.iter().map(|n| n.0).collect();
    let lrd = neigh.par_iter().map(|(_, nb)| density(nb, &kdist)).collect();
    Ok(LofModel {
        points: points.clone(),
        k,
        kdist,
        lrd,
    })
}

impl<T: Scalar> LofModel<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &FeatureMatrix<T> {
        &self.points
    }

    pub fn k_distances(&self) -> &[T] {
        &self.kdist
    }

    pub fn local_reachability_density(&self) -> &[T] {
        &self.lrd
    }

    fn score_one(&self, q: &[T]) -> T {
        let (_, nb) = neighbourhood(&self.points, q, self.k, None);
        let lrd_q = density(&nb, &self.kdist);
        let mut ratios: Vec<T> = nb.iter().map(|&(j, _)| self.lrd[j]).collect();
        canonical_sum(&mut ratios) / (T::of(nb.len() as f64) * lrd_q)
    }

    /// Reference points and `k`; densities are recomputed on load.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(BLOB_MAGIC, BLOB_VERSION);
        w.u64(self.k as u64);
        w.u64(self.points.n_items() as u64);
        w.u64(self.points.dim() as u64);
        for v in self.points.values() {
            w.f64(v.to_f64_lossless());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(bytes, BLOB_MAGIC, BLOB_VERSION)?;
        let k = r.usize()?;
        let n = r.usize()?;
        let d = r.usize()?;
        let count = n
            .checked_mul(d)
            .filter(|c| *c <= bytes.len() / 8)
            .ok_or_else(|| Error::Format("LOF blob shape exceeds payload".into()))?;
        let vals = (0..count).map(|_| r.f64().map(T::of)).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let arr = ndarray::Array2::from_shape_vec((n, d), vals).map_err(|e| Error::Format(e.to_string()))?;
        lof_fit(&FeatureMatrix::new(arr)?, k)
    }
}

/// LOF of each query against the fitted set. Values near 1 are inliers,
/// larger values are outliers.
pub fn lof_score<T: Scalar>(model: &LofModel<T>, queries: &FeatureMatrix<T>) -> Result<ScoreVector<T>> {
    if queries.dim() != model.points.dim() {
        return Err(Error::Shape(format!(
            "model was fitted on {} features, queries have {}",
            model.points.dim(),
            queries.dim()
        )));
    }
    let scores = (0..queries.n_items())
        .into_par_iter()
        .map(|i| model.score_one(queries.row_slice(i)))
        .collect();
    Ok(ScoreVector::from_vec_unchecked(scores))
}
