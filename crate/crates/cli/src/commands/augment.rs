use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use oodeval::deepaugment::{augment_dataset, AugmentConfig, DistortionParams, Img2ImgNet, DEFAULT_REFRESH_PROB};
use oodeval::Error;

use crate::inputs;
use crate::output;

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Directory of 8-bit RGB PNG images, processed in file-name order.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory; created if missing. Outputs keep their source names.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Chance of resampling the distorted network before each image.
    #[arg(long, default_value_t = DEFAULT_REFRESH_PROB)]
    pub refresh_prob: f64,
    /// `identity`, `random` (bundled seeded weights) or a 1-D NPY weight file.
    #[arg(long, default_value = "random")]
    pub weights: String,
    /// Run report path (default `<out>/augment_report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub op_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub negate_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub zero_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub scale_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub negate_signal_rate: f64,
    #[arg(long)]
    pub no_timestamp: bool,
}

pub fn run(a: AugmentArgs) -> anyhow::Result<()> {
    let cfg = AugmentConfig {
        seed: a.seed,
        refresh_prob: a.refresh_prob,
        params: DistortionParams {
            op_prob: a.op_prob,
            negate_rate: a.negate_rate,
            zero_rate: a.zero_rate,
            scale_min: a.scale_min,
            scale_max: a.scale_max,
            dropout_rate: a.dropout_rate,
            negate_signal_rate: a.negate_signal_rate,
        },
    };
    cfg.validate()?;
    let net = match a.weights.as_str() {
        "identity" => Img2ImgNet::<f64>::identity(),
        "random" => Img2ImgNet::bundled_random(),
        path => Img2ImgNet::load(path).with_context(|| format!("loading weights from {path}"))?,
    };
    let input = inputs::require_dir(&a.input, "--in")?;
    let same = fs::canonicalize(&input).ok() == fs::canonicalize(&a.out).ok();
    if same {
        bail!(Error::Config("--out must differ from --in".into()));
    }
    let mut sources: Vec<PathBuf> = fs::read_dir(&input)
        .map_err(|e| Error::Io { path: input.clone(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    sources.sort();
    if sources.is_empty() {
        bail!(Error::Config(format!("no files in {}", input.display())));
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let report = augment_dataset(&net, &sources, &a.out, &cfg)?;
    for s in &report.skipped {
        log::warn!("skipped {}: {}", s.source, s.reason);
    }
    let mut doc = output::envelope("augment", a.no_timestamp);
    doc.insert("weights".into(), a.weights.clone().into());
    output::extend(&mut doc, &report)?;
    let path = a.report.clone().unwrap_or_else(|| a.out.join("augment_report.json"));
    output::write_json(&path, &doc)
}
