use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, ValueEnum};
use ndarray::Array2;
use oodeval::detectors::{
    ae_recon_score, background_score, dropout_variance_score, kl_score, kl_templates_fit, logitavg_score,
    maxlogit_score, msp_score, sigmoid, softmax, typicality_build, typicality_score, TypicalityConfig,
    TypicalityDistance, TypicalityFallback, VarianceAggregation,
};
use oodeval::outlier_models::{
    iforest_fit, iforest_score, lof_fit, lof_score, FeatureMatrix, HeightLimit, IForestMode, IForestParams,
    IsolationForestModel, LofModel,
};
use oodeval::tensorio::{read_image, write_scores_csv, ManifestEntry};
use oodeval::{Error, LogitMatrix, ProbMatrix};
use serde_json::{json, Value};

use crate::inputs::{self, ArrayKind, Digests, ProbModeArg};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Detector {
    Msp,
    Maxlogit,
    Logitavg,
    Background,
    Kl,
    Typicality,
    Dropout,
    Ae,
    Iforest,
    Lof,
}

impl Detector {
    fn name(self) -> &'static str {
        match self {
            Detector::Msp => "msp",
            Detector::Maxlogit => "maxlogit",
            Detector::Logitavg => "logitavg",
            Detector::Background => "background",
            Detector::Kl => "kl",
            Detector::Typicality => "typicality",
            Detector::Dropout => "dropout",
            Detector::Ae => "ae",
            Detector::Iforest => "iforest",
            Detector::Lof => "lof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    Argmax,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeaturesArg {
    /// The single max-logit feature.
    Maxlogit,
    /// The full logit vector.
    Logits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IForestModeArg {
    Standard,
    PaperLiteral,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["logits", "probs", "stack", "manifest"])))]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub detector: Detector,

    /// N x C logits (NPY).
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// N x C probabilities (NPY).
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// K x N x C stack of probabilities from stochastic passes (NPY).
    #[arg(long)]
    pub stack: Option<PathBuf>,
    /// JSON manifest; ids come from its entries.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// What manifest arrays and --fit hold when the source is a manifest.
    #[arg(long, value_enum, default_value = "logits")]
    pub input: ArrayKind,
    #[arg(long, value_enum, default_value = "auto")]
    pub prob_mode: ProbModeArg,

    /// Validation outputs (same kind as the source) for kl, typicality,
    /// iforest and lof.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Typicality matrix written by the `typicality` command.
    #[arg(long)]
    pub typicality: Option<PathBuf>,
    /// Typicality trigger threshold (default 0.5, or the stored matrix's).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "l1")]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value = "argmax")]
    pub fallback: FallbackArg,
    #[arg(long)]
    pub background_class: Option<usize>,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value = "maxlogit")]
    pub features: FeaturesArg,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    /// Points per isolation tree (default min(256, N)).
    #[arg(long)]
    pub subsample: Option<usize>,
    /// `log2`, `unbounded` or a fixed depth.
    #[arg(long, default_value = "log2")]
    pub height_limit: String,
    #[arg(long, visible_alias = "mode", value_enum, default_value = "standard")]
    pub iforest_mode: IForestModeArg,
    #[arg(long, default_value_t = 20)]
    pub neighbors: usize,
    /// Write the fitted iforest/lof model here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    /// Score with a previously saved iforest/lof model instead of fitting.
    #[arg(long)]
    pub load_model: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; a provenance sidecar is written next to it as `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_timestamp: bool,
}

fn parse_height_limit(s: &str) -> anyhow::Result<HeightLimit> {
    Ok(match s {
        "log2" => HeightLimit::Log2Subsample,
        "unbounded" => HeightLimit::Unbounded,
        n => HeightLimit::Fixed(n.parse().map_err(|_| {
            Error::Config(format!("--height-limit must be log2, unbounded or an integer, got `{n}`"))
        })?),
    })
}

/// Flag combinations that can be rejected before reading any input.
fn validate(a: &ScoreArgs) -> anyhow::Result<()> {
    let d = a.detector;
    let cfg = |m: String| -> anyhow::Result<()> { Err(Error::Config(m).into()) };
    if let Some(t) = a.threshold {
        if !(t > 0.0 && t < 1.0) {
            return cfg(format!("--threshold must lie in (0, 1), got {t}"));
        }
    }
    match d {
        Detector::Kl if a.fit.is_none() => return cfg("kl needs validation outputs via --fit".into()),
        Detector::Typicality if a.fit.is_none() && a.typicality.is_none() => {
            return cfg("typicality needs --typicality MATRIX or validation outputs via --fit".into())
        }
        Detector::Iforest | Detector::Lof if a.fit.is_none() && a.load_model.is_none() => {
            return cfg(format!("{} needs validation logits via --fit or a saved model via --load-model", d.name()))
        }
        Detector::Background if a.background_class.is_none() => {
            return cfg("background needs --background-class".into())
        }
        Detector::Dropout if a.stack.is_none() && a.manifest.is_none() => {
            return cfg("dropout needs a K x N x C --stack or a manifest of K x C arrays".into())
        }
        Detector::Ae if a.manifest.is_none() => {
            return cfg("ae needs a manifest whose entries carry image_path and recon_path".into())
        }
        _ => {}
    }
    if a.stack.is_some() && d != Detector::Dropout {
        return cfg("--stack is only used by the dropout detector".into());
    }
    if (a.save_model.is_some() || a.load_model.is_some()) && !matches!(d, Detector::Iforest | Detector::Lof) {
        return cfg("--save-model/--load-model apply to iforest and lof only".into());
    }
    if matches!(d, Detector::Iforest | Detector::Lof) {
        if a.n_trees == 0 || a.neighbors == 0 {
            return cfg("--n-trees and --neighbors must be at least 1".into());
        }
        parse_height_limit(&a.height_limit)?;
    }
    Ok(())
}

/// A matrix of class outputs with its ids.
struct Outputs {
    ids: Vec<String>,
    values: Array2<f64>,
    kind: ArrayKind,
}

fn load_outputs(a: &ScoreArgs, digests: &mut Digests) -> anyhow::Result<(Outputs, Vec<ManifestEntry>)> {
    if let Some(p) = &a.logits {
        let values = inputs::matrix(&digests.npy("logits", p)?, p)?;
        return Ok((Outputs { ids: inputs::row_ids(values.nrows()), values, kind: ArrayKind::Logits }, vec![]));
    }
    if let Some(p) = &a.probs {
        let values = inputs::matrix(&digests.npy("probs", p)?, p)?;
        return Ok((Outputs { ids: inputs::row_ids(values.nrows()), values, kind: ArrayKind::Probs }, vec![]));
    }
    let path = a.manifest.as_ref().expect("source group is required");
    let manifest = digests.manifest(path)?;
    let ids = manifest.ids().map(str::to_string).collect();
    let values = inputs::manifest_rows(&manifest.entries, digests)?;
    Ok((Outputs { ids, values, kind: a.input }, manifest.entries))
}

fn load_fit(a: &ScoreArgs, kind: ArrayKind, digests: &mut Digests) -> anyhow::Result<Option<Array2<f64>>> {
    match &a.fit {
        Some(p) => {
            let role = match kind {
                ArrayKind::Logits => "fit_logits",
                ArrayKind::Probs => "fit_probs",
            };
            Ok(Some(inputs::matrix(&digests.npy(role, p)?, p)?))
        }
        None => Ok(None),
    }
}

fn mode_hint(detector: Detector) -> &'static str {
    match detector {
        Detector::Msp | Detector::Kl => {
            "pass raw --logits so softmax can be applied, or use maxlogit or typicality for multi-label sigmoid outputs"
        }
        _ => "pass raw --logits instead of probabilities",
    }
}

/// Softmax probabilities, computed from logits or validated from probs.
fn softmax_probs(values: Array2<f64>, kind: ArrayKind, mode: ProbModeArg) -> anyhow::Result<ProbMatrix> {
    Ok(match kind {
        ArrayKind::Logits => softmax(&LogitMatrix::new(values)?),
        ArrayKind::Probs => inputs::to_probs(values, mode)?,
    })
}

fn sigmoid_probs(values: Array2<f64>, kind: ArrayKind, mode: ProbModeArg) -> anyhow::Result<ProbMatrix> {
    Ok(match kind {
        ArrayKind::Logits => sigmoid(&LogitMatrix::new(values)?),
        ArrayKind::Probs => inputs::to_probs(values, mode)?,
    })
}

fn need_logits(o: &Outputs, d: Detector) -> anyhow::Result<LogitMatrix> {
    if o.kind != ArrayKind::Logits {
        bail!(Error::Mode(format!("{} scores logits, got probabilities; {}", d.name(), mode_hint(d))));
    }
    Ok(LogitMatrix::new(o.values.clone())?)
}

fn features(logits: &LogitMatrix, f: FeaturesArg) -> FeatureMatrix<f64> {
    match f {
        FeaturesArg::Maxlogit => FeatureMatrix::max_logit(logits),
        FeaturesArg::Logits => FeatureMatrix::all_logits(logits),
    }
}

struct Scored {
    ids: Vec<String>,
    scores: Vec<f64>,
    params: Value,
    model_bytes: Option<Vec<u8>>,
}

pub fn run(a: ScoreArgs) -> anyhow::Result<()> {
    validate(&a)?;
    let mut digests = Digests::default();
    let scored = compute(&a, &mut digests)?;

    let mut sidecar = output::envelope("score", a.no_timestamp);
    sidecar.insert("detector".into(), a.detector.name().into());
    sidecar.insert("params".into(), scored.params);
    sidecar.insert("seed".into(), a.seed.into());
    sidecar.insert("n_items".into(), scored.scores.len().into());
    sidecar.insert("output".into(), a.out.display().to_string().into());
    sidecar.insert("inputs".into(), serde_json::to_value(&digests.0)?);

    if let (Some(path), Some(bytes)) = (&a.save_model, &scored.model_bytes) {
        output::write_file(path, bytes)?;
        let mut meta = output::envelope("score", a.no_timestamp);
        meta.insert("detector".into(), a.detector.name().into());
        meta.insert("params".into(), sidecar["params"].clone());
        meta.insert("seed".into(), a.seed.into());
        meta.insert("model_sha256".into(), inputs::sha256_hex(bytes).into());
        output::write_json(&sidecar_path(path), &meta)?;
    }
    write_scores_csv(&a.out, scored.ids.iter().map(String::as_str).zip(scored.scores.iter().copied()))?;
    output::write_json(&sidecar_path(&a.out), &sidecar)?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn compute(a: &ScoreArgs, digests: &mut Digests) -> anyhow::Result<Scored> {
    let d = a.detector;
    let done = |ids, scores: oodeval::ScoreVector, params| Scored {
        ids,
        scores: scores.into_vec(),
        params,
        model_bytes: None,
    };
    match d {
        Detector::Dropout => return score_dropout(a, digests),
        Detector::Ae => return score_ae(a, digests),
        _ => {}
    }
    let (o, _) = load_outputs(a, digests)?;
    match d {
        Detector::Msp => {
            let probs = softmax_probs(o.values.clone(), o.kind, a.prob_mode)?;
            let s = msp_score(&probs).with_context(|| mode_hint(d))?;
            Ok(done(o.ids, s, json!({ "input": o.kind })))
        }
        Detector::Maxlogit => Ok(done(o.ids.clone(), maxlogit_score(&need_logits(&o, d)?), json!({}))),
        Detector::Logitavg => Ok(done(o.ids.clone(), logitavg_score(&need_logits(&o, d)?), json!({}))),
        Detector::Background => {
            let k = a.background_class.expect("validated");
            let probs = softmax_probs(o.values.clone(), o.kind, a.prob_mode)?;
            Ok(done(o.ids, background_score(&probs, k)?, json!({ "background_class": k, "input": o.kind })))
        }
        Detector::Kl => {
            let fit = load_fit(a, o.kind, digests)?.expect("validated");
            let templates = kl_templates_fit(&softmax_probs(fit, o.kind, a.prob_mode)?).with_context(|| mode_hint(d))?;
            let test = softmax_probs(o.values.clone(), o.kind, a.prob_mode)?;
            let s = kl_score(&test, &templates).with_context(|| mode_hint(d))?;
            Ok(done(o.ids, s, json!({ "input": o.kind })))
        }
        Detector::Typicality => {
            let (matrix, stored_t) = match &a.typicality {
                Some(p) => {
                    let bytes = digests.read("typicality", p)?;
                    super::typicality::parse_matrix(&bytes).with_context(|| format!("reading {}", p.display()))?
                }
                None => {
                    let fit = load_fit(a, o.kind, digests)?.expect("validated");
                    let t = a.threshold.unwrap_or(0.5);
                    (typicality_build(&sigmoid_probs(fit, o.kind, a.prob_mode)?, t)?, t)
                }
            };
            let config = TypicalityConfig {
                threshold: a.threshold.unwrap_or(stored_t),
                distance: match a.distance {
                    DistanceArg::L1 => TypicalityDistance::L1,
                    DistanceArg::L2 => TypicalityDistance::L2,
                },
                fallback: match a.fallback {
                    FallbackArg::Argmax => TypicalityFallback::Argmax,
                    FallbackArg::Zero => TypicalityFallback::Zero,
                },
            };
            let test = sigmoid_probs(o.values.clone(), o.kind, a.prob_mode)?;
            let s = typicality_score(&test, &matrix, &config)?;
            let params = json!({
                "threshold": config.threshold,
                "distance": format!("{:?}", a.distance).to_lowercase(),
                "fallback": format!("{:?}", a.fallback).to_lowercase(),
                "input": o.kind,
            });
            Ok(done(o.ids, s, params))
        }
        Detector::Iforest => {
            let logits = need_logits(&o, d)?;
            let queries = features(&logits, a.features);
            let params = IForestParams {
                n_trees: a.n_trees,
                subsample: a.subsample,
                height_limit: parse_height_limit(&a.height_limit)?,
                mode: match a.iforest_mode {
                    IForestModeArg::Standard => IForestMode::Standard,
                    IForestModeArg::PaperLiteral => IForestMode::PaperLiteral,
                },
                seed: a.seed,
            };
            let model = match &a.load_model {
                Some(p) => {
                    let bytes = digests.read("model", p)?;
                    IsolationForestModel::<f64>::from_bytes(&bytes)?.with_mode(params.mode)
                }
                None => {
                    let fit = load_fit(a, ArrayKind::Logits, digests)?.expect("validated");
                    iforest_fit(&features(&LogitMatrix::new(fit)?, a.features), &params)?
                }
            };
            let s = iforest_score(&model, &queries)?;
            let mut out = done(o.ids, s, json!({ "features": format!("{:?}", a.features).to_lowercase(), "iforest": model.params() }));
            out.model_bytes = a.save_model.as_ref().map(|_| model.to_bytes());
            Ok(out)
        }
        Detector::Lof => {
            let logits = need_logits(&o, d)?;
            let queries = features(&logits, a.features);
            let model = match &a.load_model {
                Some(p) => LofModel::<f64>::from_bytes(&digests.read("model", p)?)?,
                None => {
                    let fit = load_fit(a, ArrayKind::Logits, digests)?.expect("validated");
                    lof_fit(&features(&LogitMatrix::new(fit)?, a.features), a.neighbors)?
                }
            };
            let s = lof_score(&model, &queries)?;
            let mut out = done(o.ids, s, json!({ "features": format!("{:?}", a.features).to_lowercase(), "neighbors": model.k() }));
            out.model_bytes = a.save_model.as_ref().map(|_| model.to_bytes());
            Ok(out)
        }
        Detector::Dropout | Detector::Ae => unreachable!("handled above"),
    }
}

fn score_dropout(a: &ScoreArgs, digests: &mut Digests) -> anyhow::Result<Scored> {
    let (ids, stack) = match &a.stack {
        Some(p) => {
            let stack = inputs::stack3(&digests.npy("stack", p)?, p)?;
            inputs::check_prob_stack(&stack, a.prob_mode)?;
            (inputs::row_ids(stack.dim().1), stack)
        }
        None => {
            let path = a.manifest.as_ref().expect("validated");
            let manifest = digests.manifest(path)?;
            let raw = inputs::manifest_stack(&manifest.entries, digests)?;
            let stack = match a.input {
                ArrayKind::Logits => inputs::softmax_stack(&raw)?,
                ArrayKind::Probs => {
                    inputs::check_prob_stack(&raw, a.prob_mode)?;
                    raw
                }
            };
            (manifest.ids().map(str::to_string).collect(), stack)
        }
    };
    let agg = match a.aggregation {
        AggregationArg::Mean => VarianceAggregation::Mean,
        AggregationArg::Max => VarianceAggregation::Max,
    };
    let s = dropout_variance_score(&stack, agg)?;
    Ok(Scored {
        ids,
        scores: s.into_vec(),
        params: json!({ "aggregation": format!("{:?}", a.aggregation).to_lowercase(), "passes": stack.dim().0 }),
        model_bytes: None,
    })
}

/// Whole-image AE score: mean of the per-pixel reconstruction error map.
fn score_ae(a: &ScoreArgs, digests: &mut Digests) -> anyhow::Result<Scored> {
    let path = a.manifest.as_ref().expect("validated");
    let manifest = digests.manifest(path)?;
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for e in &manifest.entries {
        let (Some(img), Some(rec)) = (&e.image_path, &e.recon_path) else {
            bail!(Error::Config(format!("entry `{}` lacks image_path or recon_path", e.id)));
        };
        digests.read("image", img)?;
        digests.read("recon", rec)?;
        let map = ae_recon_score(e.id.clone(), &read_image::<f64>(img)?, &read_image::<f64>(rec)?)?;
        ids.push(e.id.clone());
        scores.push(map.mean());
    }
    Ok(Scored { ids, scores, params: json!({ "reduction": "mean" }), model_bytes: None })
}
