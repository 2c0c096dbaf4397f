use std::str::FromStr;

use ndarray::{Array2, Array3};

use super::{background_score, maxlogit_score, msp_score, softmax, LogitMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::ImageTensor;

/// H x W per-pixel anomaly scores for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SegScoreMap<T> {
    pub image_id: String,
    pub scores: Array2<T>,
}

impl<T: Scalar> SegScoreMap<T> {
    pub fn new(image_id: impl Into<String>, scores: Array2<T>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("score map must be finite".into()));
        }
        Ok(SegScoreMap {
            image_id: image_id.into(),
            scores,
        })
    }

    pub fn height(&self) -> usize {
        self.scores.nrows()
    }

    pub fn width(&self) -> usize {
        self.scores.ncols()
    }

    /// Mean pixel score, used as the image-level score.
    pub fn mean(&self) -> T {
        self.scores.iter().copied().sum::<T>() / T::of(self.scores.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegMethod {
    Msp,
    MaxLogit,
    Background(usize),
}

impl FromStr for SegMethod {
    type Err = Error;

    /// Accepts `msp`, `maxlogit` and `background:<class>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msp" => Ok(SegMethod::Msp),
            "maxlogit" => Ok(SegMethod::MaxLogit),
            other => match other.strip_prefix("background:").map(str::parse) {
                Some(Ok(k)) => Ok(SegMethod::Background(k)),
                _ => Err(Error::Config(format!(
                    "unknown segmentation method `{other}` (expected msp, maxlogit or background:<class>)"
                ))),
            },
        }
    }
}

/// Applies a whole-image scorer to every pixel of an H x W x C logit map.
pub fn seg_scores<T: Scalar>(
    image_id: impl Into<String>,
    logit_map: &Array3<T>,
    method: SegMethod,
) -> Result<SegScoreMap<T>> {
    let (h, w, c) = logit_map.dim();
    let flat = logit_map
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((h * w, c))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let logits = LogitMatrix::new(flat)?;
    let scores = match method {
        SegMethod::MaxLogit => maxlogit_score(&logits),
        SegMethod::Msp => msp_score(&softmax(&logits))?,
        SegMethod::Background(k) => background_score(&softmax(&logits), k)?,
    };
    let map = Array2::from_shape_vec((h, w), scores.into_vec()).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(SegScoreMap {
        image_id: image_id.into(),
        scores: map,
    })
}

/// Per-pixel mean absolute reconstruction error over the three channels.
pub fn ae_recon_score<T: Scalar>(
    image_id: impl Into<String>,
    input: &ImageTensor<T>,
    reconstruction: &ImageTensor<T>,
) -> Result<SegScoreMap<T>> {
    if !input.same_shape(reconstruction) {
        return Err(Error::Shape(format!(
            "input is {}x{}, reconstruction is {}x{}",
            input.height(),
            input.width(),
            reconstruction.height(),
            reconstruction.width()
        )));
    }
    let three = T::of(3.0);
    let scores: Vec<T> = input
        .as_slice()
        .chunks_exact(3)
        .zip(reconstruction.as_slice().chunks_exact(3))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum::<T>() / three)
        .collect();
    let map = Array2::from_shape_vec((input.height(), input.width()), scores)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(SegScoreMap {
        image_id: image_id.into(),
        scores: map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Axis;
    use proptest::prelude::*;

    #[test]
    fn method_parsing() {
        assert_eq!("msp".parse::<SegMethod>().unwrap(), SegMethod::Msp);
        assert_eq!("background:3".parse::<SegMethod>().unwrap(), SegMethod::Background(3));
        assert!(matches!("odin".parse::<SegMethod>(), Err(Error::Config(_))));
        assert!(matches!("background:x".parse::<SegMethod>(), Err(Error::Config(_))));
    }

    #[test]
    fn one_pixel_matches_whole_image_scorer() {
        let map = Array3::from_shape_vec((1, 1, 3), vec![2.0, 1.0, 0.0]).unwrap();
        let s = seg_scores("a", &map, SegMethod::MaxLogit).unwrap();
        assert_eq!(s.scores[[0, 0]], -2.0);
        let l = LogitMatrix::from_rows(&[vec![2.0, 1.0, 0.0]]).unwrap();
        let m = seg_scores("a", &map, SegMethod::Msp).unwrap();
        assert_eq!(m.scores[[0, 0]], msp_score(&softmax(&l)).unwrap()[0]);
    }

    #[test]
    fn constant_map_gives_constant_scores() {
        let map = Array3::from_shape_fn((3, 4, 2), |(_, _, k)| k as f64 * 0.5);
        let s = seg_scores("c", &map, SegMethod::Msp).unwrap();
        let first = s.scores[[0, 0]];
        assert!(s.scores.iter().all(|&v| v == first));
    }

    #[test]
    fn background_index_checked() {
        let map = Array3::<f64>::zeros((2, 2, 3));
        assert!(matches!(
            seg_scores("x", &map, SegMethod::Background(3)),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn recon_fixtures() {
        let a = ImageTensor::filled(2, 3, 1.0f64);
        assert!(ae_recon_score("x", &a, &a).unwrap().scores.iter().all(|&v| v == 0.0));
        let zero = ImageTensor::filled(2, 3, 0.0f64);
        assert!(ae_recon_score("x", &a, &zero).unwrap().scores.iter().all(|&v| v == 1.0));

        let mut b = ImageTensor::filled(2, 3, 0.5f64);
        let c = b.clone();
        b.set(1, 2, 1, 0.8);
        let s = ae_recon_score("x", &b, &c).unwrap();
        assert_abs_diff_eq!(s.scores[[1, 2]], 0.1, epsilon = 1e-15);
        assert_eq!(s.scores.iter().filter(|&&v| v != 0.0).count(), 1);

        let small = ImageTensor::filled(1, 3, 0.0f64);
        assert!(matches!(ae_recon_score("x", &a, &small), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn matches_per_pixel_loop(v in prop::collection::vec(-10.0f64..10.0, 2 * 3 * 4)) {
            let map = Array3::from_shape_vec((2, 3, 4), v).unwrap();
            for method in [SegMethod::MaxLogit, SegMethod::Msp, SegMethod::Background(2)] {
                let fast = seg_scores("p", &map, method).unwrap();
                for y in 0..2 {
                    for x in 0..3 {
                        let px = map.index_axis(Axis(0), y).index_axis(Axis(0), x).to_vec();
                        let l = LogitMatrix::from_rows(&[px]).unwrap();
                        let want = match method {
                            SegMethod::MaxLogit => maxlogit_score(&l)[0],
                            SegMethod::Msp => msp_score(&softmax(&l)).unwrap()[0],
                            SegMethod::Background(k) => background_score(&softmax(&l), k).unwrap()[0],
                        };
                        prop_assert_eq!(fast.scores[[y, x]], want);
                    }
                }
            }
        }
    }
}
