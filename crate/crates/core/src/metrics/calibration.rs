use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 15;
const DEFAULT_STEPS: usize = 100;

/// Accuracy on the most confident fraction of items, for each response rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RraCurve {
    pub response_rates: Vec<f64>,
    pub accuracies: Vec<f64>,
}

/// RRA curve on the 1%, 2%, ..., 100% grid.
pub fn rra_curve<T: Scalar>(confidences: &[T], correct: &[bool]) -> Result<RraCurve> {
    rra_curve_with_steps(confidences, correct, DEFAULT_STEPS)
}

/// RRA curve on the grid `k / steps`, `k = 1..=steps`. At rate `k / steps`
/// the `ceil(k * N / steps)` most confident items respond; equal confidences
/// are ordered by input index.
pub fn rra_curve_with_steps<T: Scalar>(confidences: &[T], correct: &[bool], steps: usize) -> Result<RraCurve> {
    check_inputs(confidences, correct)?;
    if steps == 0 {
        return Err(Error::Config("response-rate grid needs at least one step".into()));
    }
    let n = confidences.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| confidences[b].partial_cmp(&confidences[a]).expect("finite"));

    let mut hits = Vec::with_capacity(n + 1);
    hits.push(0usize);
    for &i in &order {
        hits.push(hits.last().unwrap() + correct[i] as usize);
    }

    let (response_rates, accuracies) = (1..=steps)
        .map(|k| {
            let m = (k * n).div_ceil(steps);
            (k as f64 / steps as f64, hits[m] as f64 / m as f64)
        })
        .unzip();
    Ok(RraCurve {
        response_rates,
        accuracies,
    })
}

/// Area under the RRA curve as the mean accuracy over the grid.
pub fn aurra(curve: &RraCurve) -> f64 {
    curve.accuracies.iter().sum::<f64>() / curve.accuracies.len() as f64
}

/// `sqrt(sum_b (n_b / N) (conf_b - acc_b)^2)` over `bins` equal-width bins
/// of `[0, 1]`; a confidence of exactly 1 falls in the last bin.
pub fn l2_calibration_error<T: Scalar>(confidences: &[T], correct: &[bool], bins: usize) -> Result<f64> {
    check_inputs(confidences, correct)?;
    if bins == 0 {
        return Err(Error::Config("need at least one calibration bin".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut hit = vec![0usize; bins];
    for (c, &ok) in confidences.iter().zip(correct) {
        let c = c.to_f64_lossless();
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Validation(format!("confidence {c} outside [0, 1]")));
        }
        let b = ((c * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += c;
        hit[b] += ok as usize;
    }
    let n = confidences.len() as f64;
    let sq: f64 = (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            let gap = conf_sum[b] / nb - hit[b] as f64 / nb;
            nb / n * gap * gap
        })
        .sum();
    Ok(sq.sqrt())
}

fn check_inputs<T: Scalar>(confidences: &[T], correct: &[bool]) -> Result<()> {
    if confidences.len() != correct.len() {
        return Err(Error::Shape(format!(
            "{} confidences but {} correctness flags",
            confidences.len(),
            correct.len()
        )));
    }
    if confidences.is_empty() {
        return Err(Error::InsufficientSamples { required: 1, got: 0 });
    }
    if confidences.iter().any(|c| !c.is_finite()) {
        return Err(Error::Validation("confidences must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_and_all_wrong() {
        let c = [0.9, 0.4, 0.7];
        let curve = rra_curve(&c, &[true; 3]).unwrap();
        assert!(curve.accuracies.iter().all(|&a| a == 1.0));
        assert_eq!(aurra(&curve), 1.0);
        assert_eq!(aurra(&rra_curve(&c, &[false; 3]).unwrap()), 0.0);
    }

    #[test]
    fn two_item_curve() {
        let curve = rra_curve(&[0.9, 0.1], &[true, false]).unwrap();
        assert_eq!(curve.response_rates.len(), 100);
        for (p, a) in curve.response_rates.iter().zip(&curve.accuracies) {
            let want = if *p <= 0.5 { 1.0 } else { 0.5 };
            assert_eq!(*a, want, "rate {p}");
        }
        assert_eq!(aurra(&curve), 0.75);
    }

    #[test]
    fn grid_is_increasing_and_ends_at_accuracy() {
        let conf = [0.2, 0.9, 0.5, 0.5, 0.6, 0.1, 0.3];
        let ok = [true, false, true, true, false, true, false];
        let curve = rra_curve(&conf, &ok).unwrap();
        assert!(curve.response_rates.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*curve.response_rates.last().unwrap(), 1.0);
        assert_eq!(*curve.accuracies.last().unwrap(), 4.0 / 7.0);
    }

    #[test]
    fn ties_resolve_by_index() {
        let curve = rra_curve_with_steps(&[0.5, 0.5], &[false, true], 2).unwrap();
        assert_eq!(curve.accuracies, vec![0.0, 0.5]);
    }

    #[test]
    fn ceil_uses_exact_integers() {
        // 7% of 100 items is exactly 7, not 8
        let conf: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 / 100.0).collect();
        let ok: Vec<bool> = (0..100).map(|i| i < 7).collect();
        let curve = rra_curve(&conf, &ok).unwrap();
        assert_eq!(curve.accuracies[6], 1.0);
        assert_eq!(curve.accuracies[7], 7.0 / 8.0);
    }

    #[test]
    fn calibration_closed_forms() {
        assert_eq!(l2_calibration_error(&[1.0; 4], &[true; 4], 15).unwrap(), 0.0);
        let half = [true, false, true, false];
        assert_eq!(l2_calibration_error(&[1.0; 4], &half, 15).unwrap(), 0.5);
        // two occupied bins: (0.5)(0.2-0)^2 + (0.5)(0.9-1)^2
        let e = l2_calibration_error(&[0.2, 0.9], &[false, true], 10).unwrap();
        assert!((e - (0.5f64 * 0.04 + 0.5 * 0.01).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn calibration_rejects_bad_input() {
        assert!(matches!(l2_calibration_error(&[1.2], &[true], 15), Err(Error::Validation(_))));
        assert!(matches!(l2_calibration_error::<f64>(&[], &[], 15), Err(Error::InsufficientSamples { .. })));
        assert!(matches!(l2_calibration_error(&[0.5], &[true], 0), Err(Error::Config(_))));
        assert!(matches!(rra_curve(&[0.5], &[true, false]), Err(Error::Shape(_))));
    }

    #[test]
    fn calibrated_sample_has_small_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let conf: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
        let ok: Vec<bool> = conf.iter().map(|&c| rng.random::<f64>() < c).collect();
        assert!(l2_calibration_error(&conf, &ok, 15).unwrap() < 0.02);
    }
}
