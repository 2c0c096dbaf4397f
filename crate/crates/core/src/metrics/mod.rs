//! Detection and uncertainty metrics.
//!
//! Anomalies are the positive class and an item is flagged when its score is
//! at least the threshold. AUPR is average precision (a step integral over
//! the descending-score sweep), not a trapezoidal interpolation of the PR
//! curve, which overstates the area.

mod calibration;
mod ranking;
mod segmentation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibration::{aurra, l2_calibration_error, rra_curve, rra_curve_with_steps, RraCurve, DEFAULT_BINS};
pub use ranking::{aupr, auroc, evaluate, fpr_at_recall, CurvePoint, RankedSweep, DEFAULT_RECALL};
pub use segmentation::{seg_evaluate, seg_evaluate_serial, AnomalyMask};

/// Binary ground truth, `true` = anomaly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<bool>,
}

impl LabelVector {
    pub fn new(labels: Vec<bool>) -> Self {
        LabelVector { labels }
    }

    pub fn from_u8(values: &[u8]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Validation(format!("labels must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(LabelVector::new)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

impl std::ops::Deref for LabelVector {
    type Target = [bool];

    fn deref(&self) -> &[bool] {
        &self.labels
    }
}

/// Detection summary. `fpr95` holds the false positive rate at
/// `recall_level`, which defaults to 0.95.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub aupr: f64,
    #[serde(rename = "fpr95")]
    pub fpr_at_recall: f64,
    pub recall_level: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub skipped_images: usize,
}
