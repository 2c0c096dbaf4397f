use std::path::PathBuf;

use anyhow::bail;
use clap::{ArgGroup, Args};
use ndarray::Array2;
use oodeval::detectors::{sigmoid, typicality_build};
use oodeval::{Error, LogitMatrix, TypicalityMatrix};
use serde::{Deserialize, Serialize};

use crate::inputs::{self, Digests, ProbModeArg};
use crate::output;

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["logits", "probs"])))]
pub struct TypicalityArgs {
    /// Validation logits (NPY); sigmoid is applied.
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// Validation probabilities (NPY).
    #[arg(long)]
    pub probs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub prob_mode: ProbModeArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timestamp: bool,
}

/// Persisted matrix fields; the envelope fields sit alongside them.
#[derive(Debug, Serialize, Deserialize)]
struct StoredMatrix {
    version: u32,
    threshold: f64,
    n_classes: usize,
    support: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

pub fn run(a: TypicalityArgs) -> anyhow::Result<()> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        bail!(Error::Config(format!("--threshold must lie in (0, 1), got {}", a.threshold)));
    }
    let mut digests = Digests::default();
    let probs = match (&a.logits, &a.probs) {
        (Some(p), _) => sigmoid(&LogitMatrix::new(inputs::matrix(&digests.npy("logits", p)?, p)?)?),
        (_, Some(p)) => inputs::to_probs(inputs::matrix(&digests.npy("probs", p)?, p)?, a.prob_mode)?,
        _ => unreachable!("source group is required"),
    };
    let m = typicality_build(&probs, a.threshold)?;
    let mut doc = output::envelope("typicality", a.no_timestamp);
    doc.insert("threshold".into(), m.threshold().into());
    doc.insert("n_classes".into(), m.n_classes().into());
    doc.insert("support".into(), serde_json::to_value(m.support())?);
    doc.insert("rows".into(), serde_json::to_value(m.rows().outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>())?);
    doc.insert("inputs".into(), serde_json::to_value(&digests.0)?);
    output::write_json(&a.out, &doc)
}

/// Reads a matrix written by [`run`]; returns it with its stored threshold.
pub fn parse_matrix(bytes: &[u8]) -> anyhow::Result<(TypicalityMatrix, f64)> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let stored: StoredMatrix = serde::Deserialize::deserialize(&value).map_err(|e| Error::Format(e.to_string()))?;
    if stored.version != output::SCHEMA_VERSION {
        bail!(Error::Format(format!("unsupported typicality matrix version {}", stored.version)));
    }
    let c = stored.n_classes;
    if stored.rows.len() != c || stored.rows.iter().any(|r| r.len() != c) {
        bail!(Error::Shape(format!("typicality matrix must be {c} x {c}")));
    }
    let rows = Array2::from_shape_vec((c, c), stored.rows.concat()).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((TypicalityMatrix::from_parts(rows, stored.threshold, stored.support)?, stored.threshold))
}
