use ndarray::{Array1, Array2, ArrayView1};

use super::{ProbMatrix, ProbMode, ScoreVector};
use crate::error::{Error, Result};
use crate::scalar::{argmax, canonical_sum, Scalar};

/// Floor applied to the reference distribution inside the log ratio.
pub const KL_FLOOR: f64 = 1e-12;

/// Mean softmax posterior per predicted class, fitted on in-distribution data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTemplates<T> {
    templates: Array2<T>,
    support: Vec<usize>,
}

impl<T: Scalar> ClassTemplates<T> {
    /// Rebuilds templates from persisted rows. Each row must be a
    /// distribution.
    pub fn from_parts(templates: Array2<T>, support: Vec<usize>) -> Result<Self> {
        if templates.nrows() != templates.ncols() || support.len() != templates.nrows() {
            return Err(Error::Shape(format!(
                "templates must be C x C with C support counts, got {:?} and {}",
                templates.dim(),
                support.len()
            )));
        }
        ProbMatrix::new(templates.clone(), ProbMode::Softmax)?;
        Ok(ClassTemplates { templates, support })
    }

    pub fn templates(&self) -> &Array2<T> {
        &self.templates
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n_classes(&self) -> usize {
        self.templates.ncols()
    }
}

/// Groups validation rows by argmax (ties to the lowest index) and averages
/// each group. Classes that are never predicted get the uniform row.
pub fn kl_templates_fit<T: Scalar>(validation: &ProbMatrix<T>) -> Result<ClassTemplates<T>> {
    validation.require_mode(ProbMode::Softmax, "KL templates")?;
    if validation.n_items() == 0 {
        return Err(Error::Fit("need at least one validation row".into()));
    }
    let c = validation.n_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, row) in validation.rows().enumerate() {
        let k = argmax(row.as_slice().expect("standard layout")).expect("nonempty row");
        members[k].push(i);
    }

    let values = validation.values();
    let mut templates = Array2::from_elem((c, c), T::one() / T::of(c as f64));
    let mut column = Vec::new();
    for (k, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let mut mean = Array1::zeros(c);
        for j in 0..c {
            column.clear();
            column.extend(rows.iter().map(|&i| values[[i, j]]));
            mean[j] = canonical_sum(&mut column);
        }
        let total: T = mean.sum();
        mean.mapv_inplace(|v| v / total);
        templates.row_mut(k).assign(&mean);
    }
    Ok(ClassTemplates {
        templates,
        support: members.iter().map(Vec::len).collect(),
    })
}

/// `KL(p || q) = sum_k p_k ln(p_k / max(q_k, KL_FLOOR))`, with `0 ln 0 = 0`.
pub fn kl_divergence<T: Scalar>(p: ArrayView1<'_, T>, q: ArrayView1<'_, T>) -> T {
    let floor = T::of(KL_FLOOR);
    p.iter()
        .zip(q.iter())
        .filter(|(pk, _)| **pk > T::zero())
        .map(|(&pk, &qk)| pk * (pk / qk.max(floor)).ln())
        .sum()
}

/// Minimum KL divergence from each test row to any class template, clipped
/// at zero against rounding.
pub fn kl_score<T: Scalar>(test: &ProbMatrix<T>, templates: &ClassTemplates<T>) -> Result<ScoreVector<T>> {
    test.require_mode(ProbMode::Softmax, "KL")?;
    if test.n_classes() != templates.n_classes() {
        return Err(Error::Shape(format!(
            "test rows have {} classes, templates have {}",
            test.n_classes(),
            templates.n_classes()
        )));
    }
    let scores = test
        .rows()
        .map(|p| {
            templates
                .templates
                .rows()
                .into_iter()
                .map(|q| kl_divergence(p, q))
                .fold(T::infinity(), T::min)
                .max(T::zero())
        })
        .collect();
    Ok(ScoreVector::from_vec_unchecked(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn soft(rows: &[Vec<f64>]) -> ProbMatrix<f64> {
        ProbMatrix::from_rows(rows, ProbMode::Softmax).unwrap()
    }

    #[test]
    fn single_row_fit() {
        let t = kl_templates_fit(&soft(&[vec![0.8, 0.2]])).unwrap();
        assert_eq!(t.templates().row(0).to_vec(), vec![0.8, 0.2]);
        assert_eq!(t.templates().row(1).to_vec(), vec![0.5, 0.5]);
        assert_eq!(t.support(), &[1, 0]);
    }

    #[test]
    fn two_row_mean() {
        let t = kl_templates_fit(&soft(&[vec![0.8, 0.2], vec![0.6, 0.4]])).unwrap();
        assert_abs_diff_eq!(t.templates()[[0, 0]], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(t.templates()[[0, 1]], 0.3, epsilon = 1e-15);
        assert_eq!(t.support(), &[2, 0]);
    }

    #[test]
    fn uniform_rows_go_to_lowest_class() {
        let t = kl_templates_fit(&soft(&[vec![0.5, 0.5], vec![0.5, 0.5]])).unwrap();
        assert_eq!(t.support(), &[2, 0]);
        assert_eq!(t.templates().row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn score_zero_on_template() {
        let t = kl_templates_fit(&soft(&[vec![0.8, 0.2]])).unwrap();
        let s = kl_score(&soft(&[vec![0.8, 0.2], vec![0.5, 0.5]]), &t).unwrap();
        assert_eq!(s.into_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_hot_vs_uniform_is_ln2() {
        let t = ClassTemplates::from_parts(
            Array2::from_shape_vec((2, 2), vec![0.5, 0.5, 0.5, 0.5]).unwrap(),
            vec![0, 0],
        )
        .unwrap();
        let s = kl_score(&soft(&[vec![1.0, 0.0]]), &t).unwrap();
        assert_abs_diff_eq!(s[0], std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn class_count_mismatch() {
        let t = kl_templates_fit(&soft(&[vec![0.8, 0.2]])).unwrap();
        assert!(matches!(kl_score(&soft(&[vec![0.2, 0.3, 0.5]]), &t), Err(Error::Shape(_))));
    }

    #[test]
    fn floor_keeps_zero_reference_finite() {
        let t = ClassTemplates::from_parts(
            Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 1.0, 0.0]).unwrap(),
            vec![1, 0],
        )
        .unwrap();
        let s = kl_score(&soft(&[vec![0.5, 0.5]]), &t).unwrap();
        let expected = 0.5 * (0.5f64).ln() + 0.5 * (0.5 / 1e-12f64).ln();
        assert_abs_diff_eq!(s[0], expected, epsilon = 1e-12);
    }

    fn dist(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, c).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn nonnegative_and_bounded_by_uniform(
            val in prop::collection::vec(dist(3), 1..8),
            test in dist(3),
        ) {
            let t = kl_templates_fit(&soft(&val)).unwrap();
            let s = kl_score(&soft(std::slice::from_ref(&test)), &t).unwrap()[0];
            prop_assert!(s >= 0.0);
            if t.support().contains(&0) {
                let uniform = Array1::from_elem(3, 1.0 / 3.0);
                let bound = kl_divergence(Array1::from(test).view(), uniform.view());
                prop_assert!(s <= bound + 1e-12);
            }
        }

        #[test]
        fn fit_ignores_row_order(val in prop::collection::vec(dist(4), 1..10)) {
            let mut rev = val.clone();
            rev.reverse();
            prop_assert_eq!(kl_templates_fit(&soft(&val)).unwrap(), kl_templates_fit(&soft(&rev)).unwrap());
        }
    }
}
