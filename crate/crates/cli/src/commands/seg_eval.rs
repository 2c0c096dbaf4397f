use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use ndarray::{Array2, Ix2, Ix3};
use oodeval::detectors::{seg_scores, SegMethod};
use oodeval::metrics::{seg_evaluate, AnomalyMask};
use oodeval::{Error, SegScoreMap};

use crate::inputs::Digests;
use crate::output;

#[derive(Debug, Args)]
pub struct SegEvalArgs {
    /// Manifest whose entries point `logits_path` at an H x W score map (or
    /// H x W x C logits) and `mask_path` at an H x W 0/1 mask.
    #[arg(long)]
    pub manifest: PathBuf,
    /// `score` reads precomputed maps; `msp`, `maxlogit` or
    /// `background:<class>` score per-pixel logits.
    #[arg(long, default_value = "score")]
    pub method: String,
    #[arg(long, default_value_t = 0.95)]
    pub recall: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timestamp: bool,
}

pub fn run(a: SegEvalArgs) -> anyhow::Result<()> {
    if !(a.recall > 0.0 && a.recall <= 1.0) {
        bail!(Error::Config(format!("--recall must lie in (0, 1], got {}", a.recall)));
    }
    let method = match a.method.as_str() {
        "score" => None,
        m => Some(m.parse::<SegMethod>()?),
    };
    let mut digests = Digests::default();
    let manifest = digests.manifest(&a.manifest)?;
    let mut images = Vec::with_capacity(manifest.len());
    for e in &manifest.entries {
        let Some(mask_path) = &e.mask_path else {
            bail!(Error::Manifest(format!("entry `{}` has no mask_path", e.id)));
        };
        let arr = digests.npy("scores", &e.logits_path)?.to_ndarray::<f64>()?;
        let map = match method {
            None => {
                let m = arr.into_dimensionality::<Ix2>().map_err(|_| {
                    Error::Shape(format!("entry `{}`: score map must be H x W", e.id))
                })?;
                SegScoreMap::new(e.id.clone(), m)?
            }
            Some(method) => {
                let m = arr.into_dimensionality::<Ix3>().map_err(|_| {
                    Error::Shape(format!("entry `{}`: logits must be H x W x C", e.id))
                })?;
                seg_scores(e.id.clone(), &m, method)?
            }
        };
        let mask_arr = digests.npy("mask", mask_path)?.to_ndarray::<f64>()?;
        let mask_arr: Array2<f64> = mask_arr
            .into_dimensionality::<Ix2>()
            .map_err(|_| Error::Shape(format!("entry `{}`: mask must be H x W", e.id)))?;
        if mask_arr.iter().any(|&v| v != 0.0 && v != 1.0) {
            bail!(Error::Validation(format!("entry `{}`: mask values must be 0 or 1", e.id)));
        }
        let mask: AnomalyMask = mask_arr.mapv(|v| v == 1.0);
        images.push((map, mask));
    }
    let report = seg_evaluate(&images, a.recall)?;
    let mut doc = output::envelope("seg-eval", a.no_timestamp);
    output::extend(&mut doc, &report)?;
    doc.insert("method".into(), a.method.clone().into());
    doc.insert("n_images".into(), images.len().into());
    doc.insert("inputs".into(), serde_json::to_value(&digests.0)?);
    output::write_json(&a.out, &doc)
}
