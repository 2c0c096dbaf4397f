use std::path::PathBuf;

use anyhow::bail;
use clap::{ArgGroup, Args};
use oodeval::metrics::RankedSweep;
use oodeval::Error;

use crate::inputs::{self, Digests};
use crate::output;

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("truth").required(true).args(["labels", "manifest"])))]
pub struct EvalArgs {
    /// `id,score` CSV (or 1-D NPY keyed by row index).
    #[arg(long)]
    pub scores: PathBuf,
    /// `id,label` CSV (or 1-D NPY of 0/1), 1 = anomalous.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Manifest whose entries carry `label`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Recall level for the false-positive-rate metric.
    #[arg(long, default_value_t = 0.95)]
    pub recall: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write roc.csv and pr.csv into this directory.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long)]
    pub no_timestamp: bool,
}

pub fn run(a: EvalArgs) -> anyhow::Result<()> {
    if !(a.recall > 0.0 && a.recall <= 1.0) {
        bail!(Error::Config(format!("--recall must lie in (0, 1], got {}", a.recall)));
    }
    let mut digests = Digests::default();
    let scores = inputs::read_scores(&a.scores, &mut digests, "scores")?;
    let labels = match (&a.labels, &a.manifest) {
        (Some(p), _) => inputs::read_labels(p, &mut digests)?,
        (_, Some(p)) => {
            let m = digests.manifest(p)?;
            m.entries
                .iter()
                .map(|e| match e.label {
                    Some(l) => Ok((e.id.clone(), l)),
                    None => Err(Error::Manifest(format!("entry `{}` has no label", e.id))),
                })
                .collect::<oodeval::Result<Vec<_>>>()?
        }
        _ => unreachable!("truth group is required"),
    };
    let (s, l) = inputs::align(&scores, &labels)?;
    let sweep = RankedSweep::new(&s, &l)?;
    let report = sweep.report(a.recall)?;

    let mut doc = output::envelope("eval", a.no_timestamp);
    output::extend(&mut doc, &report)?;
    doc.insert("inputs".into(), serde_json::to_value(&digests.0)?);
    if let Some(dir) = &a.curves {
        output::write_curve(&dir.join("roc.csv"), ["threshold", "fpr", "tpr"], &sweep.roc_curve())?;
        output::write_curve(&dir.join("pr.csv"), ["threshold", "recall", "precision"], &sweep.pr_curve())?;
    }
    output::write_json(&a.out, &doc)
}
