use rayon::slice::ParallelSliceMut;

use super::EvalReport;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_RECALL: f64 = 0.95;

const PAR_SORT_MIN: usize = 1 << 15;

/// One tie group of the descending-score sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Group {
    score: f64,
    pos: u64,
    neg: u64,
}

/// Scores sorted once and collapsed into tie groups, from which every
/// threshold metric is read off in a single linear pass.
#[derive(Debug, Clone)]
pub struct RankedSweep {
    groups: Vec<Group>,
    n_pos: u64,
    n_neg: u64,
}

/// A point on the ROC (`x` = FPR, `y` = TPR) or PR (`x` = recall,
/// `y` = precision) curve, taken at `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

impl RankedSweep {
    pub fn new<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
        for (s, &l) in scores.iter().zip(labels) {
            if !s.is_finite() {
                return Err(Error::Validation("scores must be finite".into()));
            }
            pairs.push((s.to_f64_lossless(), l));
        }
        let n_pos = pairs.iter().filter(|p| p.1).count() as u64;
        let n_neg = pairs.len() as u64 - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::DegenerateLabels {
                n_pos: n_pos as usize,
                n_neg: n_neg as usize,
            });
        }

        let desc = |a: &(f64, bool), b: &(f64, bool)| b.0.partial_cmp(&a.0).expect("finite");
        if pairs.len() >= PAR_SORT_MIN {
            pairs.par_sort_unstable_by(desc);
        } else {
            pairs.sort_unstable_by(desc);
        }

        let mut groups: Vec<Group> = Vec::new();
        for (score, label) in pairs {
            match groups.last_mut() {
                Some(g) if g.score == score => {
                    if label {
                        g.pos += 1
                    } else {
                        g.neg += 1
                    }
                }
                _ => groups.push(Group {
                    score,
                    pos: label as u64,
                    neg: !label as u64,
                }),
            }
        }
        Ok(RankedSweep { groups, n_pos, n_neg })
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos as usize
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg as usize
    }

    /// Mann-Whitney statistic with ties worth one half, computed in exact
    /// integer arithmetic and divided once.
    pub fn auroc(&self) -> f64 {
        let mut neg_above = 0u64;
        let mut twice_u: u128 = 0;
        for g in &self.groups {
            let neg_below = self.n_neg - neg_above - g.neg;
            twice_u += g.pos as u128 * (2 * neg_below as u128 + g.neg as u128);
            neg_above += g.neg;
        }
        twice_u as f64 / (2 * self.n_pos as u128 * self.n_neg as u128) as f64
    }

    /// Average precision, `sum_n (R_n - R_{n-1}) P_n`, one step per tie group.
    pub fn aupr(&self) -> f64 {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut prev_recall = 0.0;
        let mut ap = 0.0;
        for g in &self.groups {
            tp += g.pos;
            fp += g.neg;
            let recall = tp as f64 / self.n_pos as f64;
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        ap
    }

    /// FPR at the largest threshold whose TPR reaches `recall`.
    pub fn fpr_at_recall(&self, recall: f64) -> Result<f64> {
        check_recall(recall)?;
        let mut tp = 0u64;
        let mut fp = 0u64;
        for g in &self.groups {
            tp += g.pos;
            fp += g.neg;
            if tp as f64 / self.n_pos as f64 >= recall {
                return Ok(fp as f64 / self.n_neg as f64);
            }
        }
        unreachable!("full sweep reaches recall 1")
    }

    /// ROC points from `(0, 0)` through `(1, 1)`.
    pub fn roc_curve(&self) -> Vec<CurvePoint> {
        let mut out = vec![CurvePoint {
            threshold: f64::INFINITY,
            x: 0.0,
            y: 0.0,
        }];
        let (mut tp, mut fp) = (0u64, 0u64);
        for g in &self.groups {
            tp += g.pos;
            fp += g.neg;
            out.push(CurvePoint {
                threshold: g.score,
                x: fp as f64 / self.n_neg as f64,
                y: tp as f64 / self.n_pos as f64,
            });
        }
        out
    }

    /// PR points, one per tie group.
    pub fn pr_curve(&self) -> Vec<CurvePoint> {
        let (mut tp, mut fp) = (0u64, 0u64);
        self.groups
            .iter()
            .map(|g| {
                tp += g.pos;
                fp += g.neg;
                CurvePoint {
                    threshold: g.score,
                    x: tp as f64 / self.n_pos as f64,
                    y: tp as f64 / (tp + fp) as f64,
                }
            })
            .collect()
    }

    pub fn report(&self, recall: f64) -> Result<EvalReport> {
        Ok(EvalReport {
            auroc: self.auroc(),
            aupr: self.aupr(),
            fpr_at_recall: self.fpr_at_recall(recall)?,
            recall_level: recall,
            n_pos: self.n_pos(),
            n_neg: self.n_neg(),
            skipped_images: 0,
        })
    }
}

fn check_recall(recall: f64) -> Result<()> {
    if !(recall > 0.0 && recall <= 1.0) {
        return Err(Error::Config(format!("recall level must lie in (0, 1], got {recall}")));
    }
    Ok(())
}

pub fn auroc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    Ok(RankedSweep::new(scores, labels)?.auroc())
}

pub fn aupr<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    Ok(RankedSweep::new(scores, labels)?.aupr())
}

pub fn fpr_at_recall<T: Scalar>(scores: &[T], labels: &[bool], recall: f64) -> Result<f64> {
    check_recall(recall)?;
    RankedSweep::new(scores, labels)?.fpr_at_recall(recall)
}

/// All three detection metrics from a single sort.
pub fn evaluate<T: Scalar>(scores: &[T], labels: &[bool], recall: f64) -> Result<EvalReport> {
    check_recall(recall)?;
    RankedSweep::new(scores, labels)?.report(recall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn split(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut s = pos.to_vec();
        s.extend_from_slice(neg);
        let mut l = vec![true; pos.len()];
        l.extend(std::iter::repeat_n(false, neg.len()));
        (s, l)
    }

    #[test]
    fn auroc_fixtures() {
        let (s, l) = split(&[0.9, 0.7], &[0.2, 0.1]);
        assert_eq!(auroc(&s, &l).unwrap(), 1.0);
        let (s, l) = split(&[0.5], &[0.5]);
        assert_eq!(auroc(&s, &l).unwrap(), 0.5);
        let (s, l) = split(&[0.8, 0.3], &[0.4, 0.1]);
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn degenerate_labels() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[true, true]),
            Err(Error::DegenerateLabels { n_pos: 2, n_neg: 0 })
        ));
        assert!(matches!(aupr(&[0.1], &[false]), Err(Error::DegenerateLabels { .. })));
        assert!(matches!(fpr_at_recall(&[0.1], &[false], 0.95), Err(Error::DegenerateLabels { .. })));
    }

    #[test]
    fn aupr_fixtures() {
        let (s, l) = split(&[0.9, 0.7], &[0.2, 0.1]);
        assert_eq!(aupr(&s, &l).unwrap(), 1.0);
        let ap = aupr(&[0.9, 0.8, 0.7], &[false, true, true]).unwrap();
        assert_abs_diff_eq!(ap, 7.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn aupr_tie_group_is_atomic() {
        // one group holding everything: precision is the base rate
        let ap = aupr(&[1.0, 1.0, 1.0, 1.0], &[true, false, false, false]).unwrap();
        assert_eq!(ap, 0.25);
    }

    #[test]
    fn fpr_fixtures() {
        let (s, l) = split(&[4.0, 3.0, 2.0, 1.0], &[1.5, 0.5]);
        assert_eq!(fpr_at_recall(&s, &l, 0.95).unwrap(), 0.5);
        let (s, l) = split(&[0.9, 0.7], &[0.2, 0.1]);
        for r in [0.1, 0.5, 0.95, 1.0] {
            assert_eq!(fpr_at_recall(&s, &l, r).unwrap(), 0.0);
        }
        let (s, l) = split(&[0.1, 0.2], &[0.8, 0.9]);
        assert_eq!(fpr_at_recall(&s, &l, 0.95).unwrap(), 1.0);
        assert!(matches!(fpr_at_recall(&s, &l, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn curves_span_unit_square() {
        let (s, l) = split(&[0.8, 0.3], &[0.4, 0.1]);
        let sweep = RankedSweep::new(&s, &l).unwrap();
        let roc = sweep.roc_curve();
        assert_eq!((roc[0].x, roc[0].y), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.x, last.y), (1.0, 1.0));
        let pr = sweep.pr_curve();
        assert_eq!(pr.len(), 4);
        assert_eq!(pr[0].y, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(auroc(&[0.1, 0.2], &[true]), Err(Error::Shape(_))));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 4.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance((s, l) in instance()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            let a = evaluate(&s, &l, 0.9).unwrap();
            let b = evaluate(&t, &l, 0.9).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn label_flip_complements_without_ties(
            n in 2usize..50, seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
            let mut l: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            l[0] = true;
            l[1] = false;
            let flipped: Vec<bool> = l.iter().map(|x| !x).collect();
            let sum = auroc(&s, &l).unwrap() + auroc(&s, &flipped).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fpr_nondecreasing_in_recall((s, l) in instance()) {
            let sweep = RankedSweep::new(&s, &l).unwrap();
            let mut prev = 0.0;
            for r in 1..=100 {
                let f = sweep.fpr_at_recall(r as f64 / 100.0).unwrap();
                prop_assert!(f >= prev);
                prev = f;
            }
        }

        #[test]
        fn fractions_in_unit_interval((s, l) in instance()) {
            let r = evaluate(&s, &l, 0.95).unwrap();
            for v in [r.auroc, r.aupr, r.fpr_at_recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
