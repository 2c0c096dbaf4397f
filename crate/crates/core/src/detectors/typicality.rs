use ndarray::{Array1, Array2, ArrayView1};

use super::{ProbMatrix, ScoreVector};
use crate::error::{Error, Result};
use crate::scalar::{argmax, canonical_sum, Scalar};

/// How to compare a normalised test row with a typicality row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypicalityDistance {
    #[default]
    L1,
    L2,
}

/// What to score when no class of a test row clears the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypicalityFallback {
    /// Compare against the row of the most probable class.
    #[default]
    Argmax,
    /// Score the row as zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityConfig {
    pub threshold: f64,
    pub distance: TypicalityDistance,
    pub fallback: TypicalityFallback,
}

impl Default for TypicalityConfig {
    fn default() -> Self {
        TypicalityConfig {
            threshold: 0.5,
            distance: TypicalityDistance::L1,
            fallback: TypicalityFallback::Argmax,
        }
    }
}

/// C x C row-stochastic matrix. Row `c` is the normalised sum of every
/// validation output in which class `c` reached the threshold, or the uniform
/// row if none did.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalityMatrix<T> {
    rows: Array2<T>,
    threshold: f64,
    support: Vec<usize>,
}

impl<T: Scalar> TypicalityMatrix<T> {
    pub fn from_parts(rows: Array2<T>, threshold: f64, support: Vec<usize>) -> Result<Self> {
        check_threshold(threshold)?;
        if rows.nrows() != rows.ncols() || support.len() != rows.nrows() {
            return Err(Error::Shape(format!(
                "typicality matrix must be C x C with C support counts, got {:?} and {}",
                rows.dim(),
                support.len()
            )));
        }
        let tol = T::of(1e-9).max(T::epsilon() * T::of(4.0 * rows.ncols() as f64));
        for (i, row) in rows.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::Validation(format!("row {i} has negative or non-finite entries")));
            }
            if (row.sum() - T::one()).abs() > tol {
                return Err(Error::Validation(format!("row {i} does not sum to 1")));
            }
        }
        Ok(TypicalityMatrix { rows, threshold, support })
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of validation outputs that contributed to each row.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n_classes(&self) -> usize {
        self.rows.nrows()
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {t}")));
    }
    Ok(())
}

/// Builds the matrix from in-distribution outputs. Accumulation is order
/// independent: permuting the validation rows yields a bit-identical matrix.
pub fn typicality_build<T: Scalar>(validation: &ProbMatrix<T>, threshold: f64) -> Result<TypicalityMatrix<T>> {
    check_threshold(threshold)?;
    let c = validation.n_classes();
    let t = T::of(threshold);
    let values = validation.values();

    let mut triggered: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, row) in validation.rows().enumerate() {
        for (k, &p) in row.iter().enumerate() {
            if p >= t {
                triggered[k].push(i);
            }
        }
    }

    let uniform = T::one() / T::of(c as f64);
    let mut rows = Array2::from_elem((c, c), uniform);
    let mut column = Vec::new();
    for (k, members) in triggered.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut acc = Array1::zeros(c);
        for j in 0..c {
            column.clear();
            column.extend(members.iter().map(|&i| values[[i, j]]));
            acc[j] = canonical_sum(&mut column);
        }
        let total = acc.sum();
        if total > T::zero() {
            acc.mapv_inplace(|v| v / total);
            rows.row_mut(k).assign(&acc);
        }
    }
    Ok(TypicalityMatrix {
        rows,
        threshold,
        support: triggered.iter().map(Vec::len).collect(),
    })
}

/// Sum of distances between the normalised test row and the typicality row
/// of every class that clears `config.threshold`.
pub fn typicality_score<T: Scalar>(
    test: &ProbMatrix<T>,
    matrix: &TypicalityMatrix<T>,
    config: &TypicalityConfig,
) -> Result<ScoreVector<T>> {
    check_threshold(config.threshold)?;
    if test.n_classes() != matrix.n_classes() {
        return Err(Error::Shape(format!(
            "test rows have {} classes, typicality matrix has {}",
            test.n_classes(),
            matrix.n_classes()
        )));
    }
    let t = T::of(config.threshold);
    let scores = test
        .rows()
        .map(|p| {
            let q = normalise(p);
            let mut any = false;
            let mut total = T::zero();
            for (k, &pk) in p.iter().enumerate() {
                if pk >= t {
                    any = true;
                    total = total + distance(q.view(), matrix.rows.row(k), config.distance);
                }
            }
            if any {
                return total;
            }
            match config.fallback {
                TypicalityFallback::Argmax => {
                    let k = argmax(p.as_slice().expect("standard layout")).expect("nonempty row");
                    distance(q.view(), matrix.rows.row(k), config.distance)
                }
                TypicalityFallback::Zero => T::zero(),
            }
        })
        .collect();
    Ok(ScoreVector::from_vec_unchecked(scores))
}

fn normalise<T: Scalar>(p: ArrayView1<'_, T>) -> Array1<T> {
    let s = p.sum();
    if s > T::zero() {
        p.mapv(|v| v / s)
    } else {
        Array1::from_elem(p.len(), T::one() / T::of(p.len() as f64))
    }
}

fn distance<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>, metric: TypicalityDistance) -> T {
    let diffs = a.iter().zip(b.iter()).map(|(x, y)| *x - *y);
    match metric {
        TypicalityDistance::L1 => diffs.map(T::abs).sum(),
        TypicalityDistance::L2 => diffs.map(|d| d * d).sum::<T>().sqrt(),
    }
}
