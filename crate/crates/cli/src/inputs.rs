//! Loading arrays, manifests and id-keyed tables, recording a digest of every
//! file read.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use ndarray::{Array2, Array3, Axis};
use oodeval::detectors::{softmax, ProbMode};
use oodeval::tensorio::{self, ArrayBuffer, DatasetManifest, ManifestEntry};
use oodeval::{Error, LogitMatrix, ProbMatrix};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Default)]
pub struct Digests(pub Vec<InputDigest>);

impl Digests {
    pub fn read(&mut self, role: &str, path: &Path) -> anyhow::Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        self.0.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn npy(&mut self, role: &str, path: &Path) -> anyhow::Result<ArrayBuffer> {
        let bytes = self.read(role, path)?;
        tensorio::decode_npy(&bytes).with_context(|| format!("reading {}", path.display()))
    }

    pub fn manifest(&mut self, path: &Path) -> anyhow::Result<DatasetManifest> {
        self.read("manifest", path)?;
        Ok(tensorio::load_manifest(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbModeArg {
    /// Softmax if every row sums to one, sigmoid otherwise.
    Auto,
    Softmax,
    Sigmoid,
}

/// What the arrays referenced by a manifest (and `--fit`) hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Logits,
    Probs,
}

pub fn to_probs(values: Array2<f64>, mode: ProbModeArg) -> oodeval::Result<ProbMatrix> {
    match mode {
        ProbModeArg::Auto => ProbMatrix::infer(values),
        ProbModeArg::Softmax => ProbMatrix::new(values, ProbMode::Softmax),
        ProbModeArg::Sigmoid => ProbMatrix::new(values, ProbMode::Sigmoid),
    }
}

pub fn matrix(buf: &ArrayBuffer, path: &Path) -> anyhow::Result<Array2<f64>> {
    let a = buf.to_ndarray::<f64>()?;
    let shape = a.shape().to_vec();
    let m = match shape.len() {
        1 => a.into_shape_with_order((1, shape[0])).map_err(|e| Error::Shape(e.to_string()))?,
        2 => a.into_dimensionality().map_err(|e| Error::Shape(e.to_string()))?,
        _ => bail!(Error::Shape(format!("{}: expected an N x C array, got shape {shape:?}", path.display()))),
    };
    Ok(m)
}

pub fn stack3(buf: &ArrayBuffer, path: &Path) -> anyhow::Result<Array3<f64>> {
    let a = buf.to_ndarray::<f64>()?;
    if a.ndim() != 3 {
        bail!(Error::Shape(format!(
            "{}: expected a K x N x C stack, got shape {:?}",
            path.display(),
            a.shape()
        )));
    }
    Ok(a.into_dimensionality().map_err(|e| Error::Shape(e.to_string()))?)
}

pub fn row_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Stacks one `[C]` or `[1, C]` array per manifest entry into N x C.
pub fn manifest_rows(entries: &[ManifestEntry], digests: &mut Digests) -> anyhow::Result<Array2<f64>> {
    let mut rows = Vec::with_capacity(entries.len());
    for e in entries {
        let buf = digests.npy("entry", &e.logits_path)?;
        let m = matrix(&buf, &e.logits_path)?;
        if m.nrows() != 1 {
            bail!(Error::Shape(format!(
                "entry `{}`: expected one row of class outputs, got {} rows",
                e.id,
                m.nrows()
            )));
        }
        rows.push(m);
    }
    stack_rows(entries, rows)
}

/// Stacks one K x C array per manifest entry into K x N x C.
pub fn manifest_stack(entries: &[ManifestEntry], digests: &mut Digests) -> anyhow::Result<Array3<f64>> {
    let mut per_entry = Vec::with_capacity(entries.len());
    for e in entries {
        let buf = digests.npy("entry", &e.logits_path)?;
        per_entry.push(matrix(&buf, &e.logits_path)?);
    }
    let Some(first) = per_entry.first() else {
        bail!(Error::Config("manifest has no entries".into()));
    };
    let dim = first.dim();
    if let Some((e, m)) = entries.iter().zip(&per_entry).find(|(_, m)| m.dim() != dim) {
        bail!(Error::Shape(format!("entry `{}` has shape {:?}, expected {:?}", e.id, m.dim(), dim)));
    }
    let views: Vec<_> = per_entry.iter().map(|m| m.view()).collect();
    Ok(ndarray::stack(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?)
}

fn stack_rows(entries: &[ManifestEntry], rows: Vec<Array2<f64>>) -> anyhow::Result<Array2<f64>> {
    let Some(first) = rows.first() else {
        bail!(Error::Config("manifest has no entries".into()));
    };
    let c = first.ncols();
    if let Some((e, m)) = entries.iter().zip(&rows).find(|(_, m)| m.ncols() != c) {
        bail!(Error::Shape(format!("entry `{}` has {} classes, expected {c}", e.id, m.ncols())));
    }
    let views: Vec<_> = rows.iter().map(|m| m.view()).collect();
    Ok(ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?)
}

/// Softmax of each K slice of a logit stack.
pub fn softmax_stack(stack: &Array3<f64>) -> anyhow::Result<Array3<f64>> {
    let mut out = stack.clone();
    for (k, slice) in stack.outer_iter().enumerate() {
        let p = softmax(&LogitMatrix::new(slice.to_owned())?);
        out.index_axis_mut(Axis(0), k).assign(p.values());
    }
    Ok(out)
}

/// Validates every K slice as a probability matrix.
pub fn check_prob_stack(stack: &Array3<f64>, mode: ProbModeArg) -> anyhow::Result<()> {
    for slice in stack.outer_iter() {
        to_probs(slice.to_owned(), mode)?;
    }
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// `id,score` CSV, or a 1-D NPY array keyed by row index.
pub fn read_scores(path: &Path, digests: &mut Digests, role: &str) -> anyhow::Result<Vec<(String, f64)>> {
    if is_csv(path) {
        digests.read(role, path)?;
        let rows = tensorio::read_scores_csv(path)?;
        return Ok(rows.into_iter().map(|r| (r.id, r.value)).collect());
    }
    let v = vector(&digests.npy(role, path)?, path)?;
    Ok(row_ids(v.len()).into_iter().zip(v).collect())
}

/// `id,label` CSV, or a 1-D NPY array of 0/1 keyed by row index.
pub fn read_labels(path: &Path, digests: &mut Digests) -> anyhow::Result<Vec<(String, u8)>> {
    if is_csv(path) {
        digests.read("labels", path)?;
        let rows = tensorio::read_labels_csv(path)?;
        return Ok(rows.into_iter().map(|r| (r.id, r.value)).collect());
    }
    let v = vector(&digests.npy("labels", path)?, path)?;
    let labels = v
        .iter()
        .map(|&x| match x {
            0.0 => Ok(0u8),
            1.0 => Ok(1u8),
            _ => Err(Error::Validation(format!("{}: label {x} is not 0 or 1", path.display()))),
        })
        .collect::<oodeval::Result<Vec<_>>>()?;
    Ok(row_ids(labels.len()).into_iter().zip(labels).collect())
}

pub fn vector(buf: &ArrayBuffer, path: &Path) -> anyhow::Result<Vec<f64>> {
    let shape = buf.shape();
    if !(shape.len() == 1 || (shape.len() == 2 && shape[1] == 1)) {
        bail!(Error::Shape(format!("{}: expected a 1-D array, got shape {shape:?}", path.display())));
    }
    Ok(buf.to_scalars::<f64>()?)
}

/// Pairs scores with labels by id. Every score id needs a label and every
/// label id a score; the first id breaking that is reported.
pub fn align(scores: &[(String, f64)], labels: &[(String, u8)]) -> anyhow::Result<(Vec<f64>, Vec<bool>)> {
    let mut index = std::collections::HashMap::with_capacity(labels.len());
    for (id, l) in labels {
        if index.insert(id.as_str(), *l).is_some() {
            bail!(Error::Alignment(id.clone()));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(scores.len());
    let mut s = Vec::with_capacity(scores.len());
    let mut l = Vec::with_capacity(scores.len());
    for (id, v) in scores {
        if !seen.insert(id.as_str()) {
            bail!(Error::Alignment(id.clone()));
        }
        let Some(&lab) = index.get(id.as_str()) else {
            bail!(Error::Alignment(id.clone()));
        };
        s.push(*v);
        l.push(lab == 1);
    }
    if let Some((id, _)) = labels.iter().find(|(id, _)| !seen.contains(id.as_str())) {
        bail!(Error::Alignment(id.clone()));
    }
    Ok((s, l))
}

pub fn require_dir(path: &Path, what: &str) -> anyhow::Result<PathBuf> {
    if !path.is_dir() {
        bail!(Error::Config(format!("{what} `{}` is not a directory", path.display())));
    }
    Ok(path.to_path_buf())
}
