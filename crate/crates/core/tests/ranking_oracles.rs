use oodeval::metrics::{aupr, auroc, evaluate, fpr_at_recall, RankedSweep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random scores on a coarse grid so ties are common, with at least one
/// positive and one negative.
fn instance(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=max_n);
    let levels = rng.random_range(2..=20);
    let mut scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    labels[1] = false;
    if rng.random_bool(0.2) {
        scores.iter_mut().for_each(|s| *s += rng.random_range(0.0..1e-3));
    }
    (scores, labels)
}

fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut twice_wins = 0u64;
    let (mut p, mut n) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            n += 1;
            continue;
        }
        p += 1;
        for (j, &lj) in labels.iter().enumerate() {
            if !lj {
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    twice_wins as f64 / (2 * p * n) as f64
}

/// Every distinct score as a threshold, flagging `score >= t`.
fn threshold_table(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut ts: Vec<f64> = scores.to_vec();
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ts.dedup();
    ts.into_iter()
        .map(|t| {
            let tp = scores.iter().zip(labels).filter(|(s, l)| **l && **s >= t).count();
            let fp = scores.iter().zip(labels).filter(|(s, l)| !**l && **s >= t).count();
            (t, tp, fp)
        })
        .collect()
}

fn sweep_fpr(scores: &[f64], labels: &[bool], recall: f64) -> f64 {
    let p = labels.iter().filter(|l| **l).count();
    let n = labels.len() - p;
    for (_, tp, fp) in threshold_table(scores, labels) {
        if tp as f64 / p as f64 >= recall {
            return fp as f64 / n as f64;
        }
    }
    unreachable!("the lowest threshold flags every positive")
}

fn step_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let p = labels.iter().filter(|l| **l).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (_, tp, fp) in threshold_table(scores, labels) {
        let recall = tp as f64 / p;
        ap += (recall - prev_recall) * tp as f64 / (tp + fp) as f64;
        prev_recall = recall;
    }
    ap
}

#[test]
fn auroc_matches_pairwise_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (s, l) = instance(&mut rng, 300);
        let got = auroc(&s, &l).unwrap();
        assert!((got - pairwise_auroc(&s, &l)).abs() <= 1e-12);
    }
}

#[test]
fn fpr_matches_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let (s, l) = instance(&mut rng, 200);
        for recall in [0.95, 0.5, 1.0, 0.01] {
            assert_eq!(fpr_at_recall(&s, &l, recall).unwrap(), sweep_fpr(&s, &l, recall));
        }
    }
}

#[test]
fn aupr_matches_step_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (s, l) = instance(&mut rng, 200);
        assert!((aupr(&s, &l).unwrap() - step_ap(&s, &l)).abs() <= 1e-12);
    }
}

#[test]
fn aupr_chance_level_is_positive_fraction() {
    let mut total = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let scores: Vec<f64> = (0..12_000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..12_000).map(|i| i < 2000).collect();
        total += aupr(&scores, &labels).unwrap();
    }
    assert!((total / 20.0 - 2000.0 / 12_000.0).abs() < 0.01);
}

#[test]
fn metrics_depend_only_on_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (s, l) = instance(&mut rng, 100);
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        assert_eq!(evaluate(&s, &l, 0.95).unwrap(), evaluate(&t, &l, 0.95).unwrap());
    }
}

#[test]
fn flipped_labels_complement_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..200);
        let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mut l: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        l[0] = true;
        l[1] = false;
        let flipped: Vec<bool> = l.iter().map(|v| !v).collect();
        let sum = auroc(&s, &l).unwrap() + auroc(&s, &flipped).unwrap();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn curves_end_at_the_corners() {
    let s = [0.9, 0.8, 0.8, 0.3, 0.1];
    let l = [true, false, true, false, true];
    let sweep = RankedSweep::new(&s, &l).unwrap();
    let roc = sweep.roc_curve();
    let last = roc.last().unwrap();
    assert_eq!((last.x, last.y), (1.0, 1.0));
    let pr = sweep.pr_curve();
    assert_eq!(pr.last().unwrap().x, 1.0);
}
