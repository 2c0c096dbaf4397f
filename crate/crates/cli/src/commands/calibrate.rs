use std::path::PathBuf;

use anyhow::bail;
use clap::{ArgGroup, Args};
use oodeval::detectors::softmax;
use oodeval::metrics::{aurra, l2_calibration_error, rra_curve_with_steps, DEFAULT_BINS};
use oodeval::scalar::argmax;
use oodeval::{Error, LogitMatrix};

use crate::inputs::{self, Digests, ProbModeArg};
use crate::output;

/// Either class outputs plus targets, or confidences plus correctness flags.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("conf_source").required(true).args(["logits", "probs", "confidence"])))]
pub struct ConfidenceArgs {
    /// N x C logits (NPY); softmax is applied.
    #[arg(long, requires = "targets")]
    pub logits: Option<PathBuf>,
    /// N x C probabilities (NPY).
    #[arg(long, requires = "targets")]
    pub probs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub prob_mode: ProbModeArg,
    /// True class index per item (1-D NPY).
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Confidence per item (`id,score` CSV or 1-D NPY).
    #[arg(long, requires = "correct")]
    pub confidence: Option<PathBuf>,
    /// Correctness per item (`id,label` CSV or 1-D NPY), 1 = correct.
    #[arg(long)]
    pub correct: Option<PathBuf>,
}

impl ConfidenceArgs {
    fn load(&self, digests: &mut Digests) -> anyhow::Result<(Vec<f64>, Vec<bool>)> {
        if let Some(p) = &self.confidence {
            let conf = inputs::read_scores(p, digests, "confidence")?;
            let correct = inputs::read_labels(self.correct.as_ref().expect("required by clap"), digests)?;
            return inputs::align(&conf, &correct);
        }
        let probs = match (&self.logits, &self.probs) {
            (Some(p), _) => softmax(&LogitMatrix::new(inputs::matrix(&digests.npy("logits", p)?, p)?)?),
            (_, Some(p)) => inputs::to_probs(inputs::matrix(&digests.npy("probs", p)?, p)?, self.prob_mode)?,
            _ => unreachable!("source group is required"),
        };
        let tp = self.targets.as_ref().expect("required by clap");
        let targets = inputs::vector(&digests.npy("targets", tp)?, tp)?;
        if targets.len() != probs.n_items() {
            bail!(Error::Shape(format!("{} targets for {} items", targets.len(), probs.n_items())));
        }
        let c = probs.n_classes();
        let mut conf = Vec::with_capacity(targets.len());
        let mut correct = Vec::with_capacity(targets.len());
        for (row, &t) in probs.rows().zip(&targets) {
            if t.fract() != 0.0 || t < 0.0 || t >= c as f64 {
                bail!(Error::Validation(format!("target {t} is not a class index below {c}")));
            }
            let row = row.to_vec();
            let k = argmax(&row).expect("at least two classes");
            conf.push(row[k]);
            correct.push(k == t as usize);
        }
        Ok((conf, correct))
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub source: ConfidenceArgs,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct AurraArgs {
    #[command(flatten)]
    pub source: ConfidenceArgs,
    /// Response-rate grid size (rates 1/steps, 2/steps, ..., 1).
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timestamp: bool,
}

pub fn run_calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    if a.bins == 0 {
        bail!(Error::Config("--bins must be at least 1".into()));
    }
    let mut digests = Digests::default();
    let (conf, correct) = a.source.load(&mut digests)?;
    let err = l2_calibration_error(&conf, &correct, a.bins)?;
    let mut doc = output::envelope("calibrate", a.no_timestamp);
    doc.insert("l2_calibration_error".into(), err.into());
    doc.insert("bins".into(), a.bins.into());
    doc.insert("n".into(), conf.len().into());
    doc.insert("accuracy".into(), (correct.iter().filter(|c| **c).count() as f64 / conf.len() as f64).into());
    doc.insert("inputs".into(), serde_json::to_value(&digests.0)?);
    output::write_json(&a.out, &doc)
}

pub fn run_aurra(a: AurraArgs) -> anyhow::Result<()> {
    if a.steps == 0 {
        bail!(Error::Config("--steps must be at least 1".into()));
    }
    let mut digests = Digests::default();
    let (conf, correct) = a.source.load(&mut digests)?;
    let curve = rra_curve_with_steps(&conf, &correct, a.steps)?;
    let mut doc = output::envelope("aurra", a.no_timestamp);
    doc.insert("aurra".into(), aurra(&curve).into());
    doc.insert("steps".into(), a.steps.into());
    doc.insert("n".into(), conf.len().into());
    output::extend(&mut doc, &curve)?;
    doc.insert("inputs".into(), serde_json::to_value(&digests.0)?);
    output::write_json(&a.out, &doc)
}
