use ndarray::Array2;
use rayon::prelude::*;

use super::{EvalReport, RankedSweep};
use crate::detectors::SegScoreMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// H x W ground truth, `true` = anomalous pixel.
pub type AnomalyMask = Array2<bool>;

struct PerImage<'a> {
    id: &'a str,
    metrics: Option<EvalReport>,
}

/// Per-image metrics averaged over images, each pixel treated as one
/// prediction. Images whose mask lacks either class are skipped and counted.
///
/// Images are evaluated in parallel; the mean is accumulated in image-id
/// order so results are bit-identical to [`seg_evaluate_serial`].
pub fn seg_evaluate<T: Scalar>(images: &[(SegScoreMap<T>, AnomalyMask)], recall: f64) -> Result<EvalReport> {
    let per: Vec<PerImage<'_>> = images
        .par_iter()
        .map(|(map, mask)| evaluate_image(map, mask, recall))
        .collect::<Result<_>>()?;
    reduce(per, recall)
}

pub fn seg_evaluate_serial<T: Scalar>(
    images: &[(SegScoreMap<T>, AnomalyMask)],
    recall: f64,
) -> Result<EvalReport> {
    let per: Vec<PerImage<'_>> = images
        .iter()
        .map(|(map, mask)| evaluate_image(map, mask, recall))
        .collect::<Result<_>>()?;
    reduce(per, recall)
}

fn evaluate_image<'a, T: Scalar>(map: &'a SegScoreMap<T>, mask: &AnomalyMask, recall: f64) -> Result<PerImage<'a>> {
    if map.scores.dim() != mask.dim() {
        return Err(Error::Shape(format!(
            "image `{}`: score map is {:?}, mask is {:?}",
            map.image_id,
            map.scores.dim(),
            mask.dim()
        )));
    }
    let scores: Vec<T> = map.scores.iter().copied().collect();
    let labels: Vec<bool> = mask.iter().copied().collect();
    let metrics = match RankedSweep::new(&scores, &labels) {
        Ok(sweep) => Some(sweep.report(recall)?),
        Err(Error::DegenerateLabels { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PerImage {
        id: &map.image_id,
        metrics,
    })
}

fn reduce(mut per: Vec<PerImage<'_>>, recall: f64) -> Result<EvalReport> {
    per.sort_by(|a, b| a.id.cmp(b.id));
    let skipped = per.iter().filter(|p| p.metrics.is_none()).count();
    let used: Vec<&EvalReport> = per.iter().filter_map(|p| p.metrics.as_ref()).collect();
    if used.is_empty() {
        return Err(Error::DegenerateLabels { n_pos: 0, n_neg: 0 });
    }
    let n = used.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| used.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(EvalReport {
        auroc: mean(|r| r.auroc),
        aupr: mean(|r| r.aupr),
        fpr_at_recall: mean(|r| r.fpr_at_recall),
        recall_level: recall,
        n_pos: used.iter().map(|r| r.n_pos).sum(),
        n_neg: used.iter().map(|r| r.n_neg).sum(),
        skipped_images: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate;

    fn map(id: &str, h: usize, w: usize, v: Vec<f64>) -> SegScoreMap<f64> {
        SegScoreMap::new(id, Array2::from_shape_vec((h, w), v).unwrap()).unwrap()
    }

    fn mask(h: usize, w: usize, v: &[u8]) -> AnomalyMask {
        Array2::from_shape_vec((h, w), v.iter().map(|&x| x == 1).collect()).unwrap()
    }

    #[test]
    fn single_image_equals_flat_metrics() {
        let scores = vec![0.8, 0.3, 0.4, 0.1, 0.6, 0.2];
        let labels = [1, 1, 0, 0, 1, 0];
        let r = seg_evaluate(&[(map("a", 2, 3, scores.clone()), mask(2, 3, &labels))], 0.95).unwrap();
        let flat: Vec<bool> = labels.iter().map(|&x| x == 1).collect();
        assert_eq!(r, evaluate(&scores, &flat, 0.95).unwrap());
    }

    #[test]
    fn two_images_average() {
        let perfect = (map("a", 1, 2, vec![0.9, 0.1]), mask(1, 2, &[1, 0]));
        let tied = (map("b", 1, 2, vec![0.5, 0.5]), mask(1, 2, &[1, 0]));
        let r = seg_evaluate(&[perfect, tied], 0.95).unwrap();
        assert_eq!(r.auroc, 0.75);
        assert_eq!(r.n_pos, 2);
        assert_eq!(r.skipped_images, 0);
    }

    #[test]
    fn images_without_anomalies_are_skipped() {
        let good = (map("a", 1, 2, vec![0.9, 0.1]), mask(1, 2, &[1, 0]));
        let clean = (map("b", 1, 2, vec![0.5, 0.4]), mask(1, 2, &[0, 0]));
        let r = seg_evaluate(&[good, clean.clone()], 0.95).unwrap();
        assert_eq!(r.skipped_images, 1);
        assert_eq!(r.auroc, 1.0);
        assert!(matches!(seg_evaluate(&[clean], 0.95), Err(Error::DegenerateLabels { .. })));
    }

    #[test]
    fn shape_mismatch() {
        let bad = (map("a", 1, 2, vec![0.9, 0.1]), mask(2, 1, &[1, 0]));
        assert!(matches!(seg_evaluate(&[bad], 0.95), Err(Error::Shape(_))));
    }

    #[test]
    fn parallel_equals_serial_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let images: Vec<_> = (0..12)
            .map(|i| {
                let v: Vec<f64> = (0..64).map(|_| rng.random()).collect();
                let m: Vec<u8> = (0..64).map(|_| rng.random_bool(0.2) as u8).collect();
                (map(&format!("img{:02}", 11 - i), 8, 8, v), mask(8, 8, &m))
            })
            .collect();
        let a = seg_evaluate(&images, 0.95).unwrap();
        let b = seg_evaluate_serial(&images, 0.95).unwrap();
        assert_eq!(a.auroc.to_bits(), b.auroc.to_bits());
        assert_eq!(a.aupr.to_bits(), b.aupr.to_bits());
        assert_eq!(a.fpr_at_recall.to_bits(), b.fpr_at_recall.to_bits());
        let mut rev = images.clone();
        rev.reverse();
        assert_eq!(seg_evaluate(&rev, 0.95).unwrap(), a);
    }
}
