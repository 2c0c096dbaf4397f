use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distort::{
    apply_weight_distortions, deepaugment_forward, sample_signal_distortions, sample_weight_distortions,
    DistortionParams, SignalPlan, WeightOp,
};
use super::net::Img2ImgNet;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;
use crate::tensorio::{read_image, write_image, ImageTensor};

pub const DEFAULT_REFRESH_PROB: f64 = 0.05;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub seed: u64,
    pub refresh_prob: f64,
    pub params: DistortionParams,
}

impl AugmentConfig {
    pub fn new(seed: u64) -> Self {
        AugmentConfig { seed, refresh_prob: DEFAULT_REFRESH_PROB, params: DistortionParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.refresh_prob) {
            return Err(Error::Config(format!("refresh probability must lie in [0, 1], got {}", self.refresh_prob)));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub index: usize,
    pub first_image: usize,
    pub weight_ops: Vec<WeightOp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub index: usize,
    pub source: String,
    pub output: String,
    pub network: usize,
    pub signal_ops: SignalPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub index: usize,
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub version: u32,
    pub seed: u64,
    pub refresh_prob: f64,
    pub params: DistortionParams,
    pub networks: Vec<NetworkRecord>,
    pub images: Vec<ImageRecord>,
    pub skipped: Vec<SkipRecord>,
}

/// Network index used for each image. One refresh draw is made per image,
/// before its forward pass, so the schedule depends only on the seed and the
/// number of images.
pub fn network_schedule(seed: u64, n_images: usize, refresh_prob: f64) -> Vec<usize> {
    let mut rng = substream(seed, Stream::Refresh);
    let mut current = 0;
    (0..n_images)
        .map(|_| {
            if rng.random::<f64>() < refresh_prob {
                current += 1;
            }
            current
        })
        .collect()
}

/// Samples and applies the weight ops for network `index`.
pub fn distorted_network<T: Scalar>(
    clean: &Img2ImgNet<T>,
    index: usize,
    cfg: &AugmentConfig,
) -> Result<(Img2ImgNet<T>, Vec<WeightOp>)> {
    let mut rng = substream(cfg.seed, Stream::Network(index as u64));
    let ops = sample_weight_distortions(&mut rng, clean.n_blocks(), &cfg.params);
    let net = apply_weight_distortions(clean, &ops, &mut rng)?;
    Ok((net, ops))
}

/// One augmented image. Its randomness comes from the image's own stream.
pub fn augment_one<T: Scalar>(
    net: &Img2ImgNet<T>,
    img: &ImageTensor<T>,
    image_index: usize,
    cfg: &AugmentConfig,
) -> Result<(ImageTensor<T>, SignalPlan)> {
    let mut rng = substream(cfg.seed, Stream::Image(image_index as u64));
    let plan = sample_signal_distortions(&mut rng, net.n_blocks(), &cfg.params);
    let out = deepaugment_forward(net, img, &plan, &mut rng)?;
    Ok((out, plan))
}

struct Networks<T> {
    schedule: Vec<usize>,
    nets: BTreeMap<usize, (Img2ImgNet<T>, NetworkRecord)>,
}

fn build_networks<T: Scalar>(clean: &Img2ImgNet<T>, n_images: usize, cfg: &AugmentConfig) -> Result<Networks<T>> {
    cfg.validate()?;
    let schedule = network_schedule(cfg.seed, n_images, cfg.refresh_prob);
    let mut nets = BTreeMap::new();
    for (i, &n) in schedule.iter().enumerate() {
        if let std::collections::btree_map::Entry::Vacant(e) = nets.entry(n) {
            let (net, weight_ops) = distorted_network(clean, n, cfg)?;
            e.insert((net, NetworkRecord { index: n, first_image: i, weight_ops }));
        }
    }
    Ok(Networks { schedule, nets })
}

/// In-memory augmentation. Returns outputs in input order with the network
/// records and per-image signal plans.
#[allow(clippy::type_complexity)]
pub fn augment_images<T: Scalar>(
    clean: &Img2ImgNet<T>,
    images: &[ImageTensor<T>],
    cfg: &AugmentConfig,
) -> Result<(Vec<ImageTensor<T>>, Vec<NetworkRecord>, Vec<usize>, Vec<SignalPlan>)> {
    let nets = build_networks(clean, images.len(), cfg)?;
    let results = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| augment_one(&nets.nets[&nets.schedule[i]].0, img, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (outs, plans) = results.into_iter().unzip();
    let records = nets.nets.into_values().map(|(_, r)| r).collect();
    Ok((outs, records, nets.schedule, plans))
}

enum Outcome {
    Done(ImageRecord),
    Skipped(SkipRecord),
}

/// Augments every source image into `out_dir`, keeping the file name and
/// writing PNG. Unreadable sources are skipped and listed in the report.
pub fn augment_dataset<T: Scalar>(
    clean: &Img2ImgNet<T>,
    sources: &[PathBuf],
    out_dir: &Path,
    cfg: &AugmentConfig,
) -> Result<AugmentReport> {
    if sources.is_empty() {
        return Err(Error::Config("no input images".into()));
    }
    let nets = build_networks(clean, sources.len(), cfg)?;
    let outcomes = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| -> Result<Outcome> {
            let source = src.display().to_string();
            let img = match read_image::<T>(src) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("skipping {source}: {e}");
                    return Ok(Outcome::Skipped(SkipRecord { index: i, source, reason: e.to_string() }));
                }
            };
            let network = nets.schedule[i];
            let (out, signal_ops) = augment_one(&nets.nets[&network].0, &img, i, cfg)?;
            let name = src
                .file_stem()
                .ok_or_else(|| Error::Config(format!("source {source} has no file name")))?;
            let dst = out_dir.join(name).with_extension("png");
            write_image(&dst, &out)?;
            Ok(Outcome::Done(ImageRecord {
                index: i,
                source,
                output: dst.display().to_string(),
                network,
                signal_ops,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Done(r) => images.push(r),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    let used: std::collections::BTreeSet<usize> = images.iter().map(|r| r.network).collect();
    let networks = nets
        .nets
        .into_iter()
        .filter(|(n, _)| used.contains(n))
        .map(|(_, (_, r))| r)
        .collect();
    Ok(AugmentReport {
        version: REPORT_VERSION,
        seed: cfg.seed,
        refresh_prob: cfg.refresh_prob,
        params: cfg.params,
        networks,
        images,
        skipped,
    })
}
