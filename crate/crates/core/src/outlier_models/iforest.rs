//! Isolation forest.
//!
//! Each tree recursively splits a random subsample on a uniformly chosen
//! feature at a uniform position inside that feature's range, until every
//! node holds one point, only duplicates, or the height limit is reached.
//! Points that isolate after few splits are anomalous.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blob::{BlobReader, BlobWriter};
use super::FeatureMatrix;
use crate::detectors::ScoreVector;
use crate::error::{Error, Result};
use crate::rng::{substream, Rng, Stream};
use crate::scalar::Scalar;

const BLOB_MAGIC: &[u8; 8] = b"OODIFRST";
const BLOB_VERSION: u32 = 1;
const DEFAULT_SUBSAMPLE: usize = 256;
const EXACT_HARMONIC_MAX: usize = 1_000_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IForestMode {
    /// `2^(-E[h(x)] / c(psi))`, in `(0, 1]`.
    #[default]
    Standard,
    /// `-0.5 - sum_j 2^(-depth_j / (n_trees * c(psi)))`, always `<= -0.5`.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightLimit {
    /// `ceil(log2(psi))`.
    #[default]
    Log2Subsample,
    Fixed(usize),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IForestParams {
    pub n_trees: usize,
    /// Points per tree; `None` means `min(256, N)`.
    pub subsample: Option<usize>,
    pub height_limit: HeightLimit,
    pub mode: IForestMode,
    pub seed: u64,
}

impl Default for IForestParams {
    fn default() -> Self {
        IForestParams {
            n_trees: 100,
            subsample: None,
            height_limit: HeightLimit::default(),
            mode: IForestMode::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        value: T,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Binary tree stored as an arena; node 0 is the root. Points with
/// `x[feature] <= value` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree<T> {
    nodes: Vec<TreeNode<T>>,
    /// `c(size)` for every leaf, indexed like `nodes`.
    leaf_adjust: Vec<T>,
}

impl<T: Scalar> IsolationTree<T> {
    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    fn from_nodes(nodes: Vec<TreeNode<T>>) -> Self {
        let leaf_adjust = nodes
            .iter()
            .map(|n| match n {
                TreeNode::Leaf { size } => average_path_length(*size),
                TreeNode::Split { .. } => T::zero(),
            })
            .collect();
        IsolationTree { nodes, leaf_adjust }
    }

    /// Edges from the root to the leaf that `x` falls into, and that leaf.
    pub fn depth(&self, x: &[T]) -> (usize, usize) {
        let mut node = 0;
        let mut depth = 0;
        while let TreeNode::Split {
            feature,
            value,
            left,
            right,
        } = self.nodes[node]
        {
            node = if x[feature] <= value { left } else { right };
            depth += 1;
        }
        (depth, node)
    }

    /// Depth plus the expected remaining depth `c(leaf size)`.
    pub fn path_length(&self, x: &[T]) -> T {
        let (depth, leaf) = self.depth(x);
        T::of(depth as f64) + self.leaf_adjust[leaf]
    }

    pub fn leaf_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { size } => Some(*size),
            TreeNode::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel<T> {
    trees: Vec<IsolationTree<T>>,
    subsample: usize,
    n_features: usize,
    max_depth: Option<usize>,
    normalizer: T,
    params: IForestParams,
}

/// `H(n) = 1 + 1/2 + ... + 1/n`, exact summation up to one million terms,
/// asymptotic expansion beyond.
pub fn harmonic<T: Scalar>(n: usize) -> T {
    if n <= EXACT_HARMONIC_MAX {
        (1..=n).rev().map(|i| T::one() / T::of(i as f64)).sum()
    } else {
        let nf = n as f64;
        T::of(nf.ln() + EULER_GAMMA + 1.0 / (2.0 * nf) - 1.0 / (12.0 * nf * nf))
    }
}

/// Average path length of an unsuccessful binary-search-tree lookup over
/// `n` keys: `c(n) = 2 H(n-1) - 2 (n-1) / n`, with `c(0) = c(1) = 0`.
pub fn average_path_length<T: Scalar>(n: usize) -> T {
    if n <= 1 {
        return T::zero();
    }
    let nf = T::of(n as f64);
    let m = T::of((n - 1) as f64);
    T::of(2.0) * harmonic::<T>(n - 1) - T::of(2.0) * m / nf
}

pub fn iforest_fit<T: Scalar>(data: &FeatureMatrix<T>, params: &IForestParams) -> Result<IsolationForestModel<T>> {
    let n = data.n_items();
    if n < 2 {
        return Err(Error::Fit(format!("isolation forest needs at least 2 points, got {n}")));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    let psi = match params.subsample {
        None => n.min(DEFAULT_SUBSAMPLE),
        Some(s) if (2..=n).contains(&s) => s,
        Some(s) => {
            return Err(Error::Config(format!("subsample must lie in [2, {n}], got {s}")));
        }
    };
    let max_depth = match params.height_limit {
        HeightLimit::Log2Subsample => Some((psi as f64).log2().ceil() as usize),
        HeightLimit::Fixed(h) => Some(h),
        HeightLimit::Unbounded => None,
    };

    let mut rng = substream(params.seed, Stream::Fit);
    let trees = (0..params.n_trees)
        .map(|_| {
            let mut sample = index::sample(&mut rng, n, psi).into_vec();
            let mut builder = TreeBuilder {
                data,
                rng: &mut rng,
                max_depth,
                nodes: Vec::new(),
            };
            builder.build(&mut sample, 0);
            IsolationTree::from_nodes(builder.nodes)
        })
        .collect();

    Ok(IsolationForestModel {
        trees,
        subsample: psi,
        n_features: data.dim(),
        max_depth,
        normalizer: average_path_length(psi),
        params: *params,
    })
}

struct TreeBuilder<'a, T> {
    data: &'a FeatureMatrix<T>,
    rng: &'a mut Rng,
    max_depth: Option<usize>,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> TreeBuilder<'_, T> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { size: idx.len() });
        if idx.len() <= 1 || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }

        let ranges: Vec<(usize, T, T)> = (0..self.data.dim())
            .filter_map(|f| {
                let (lo, hi) = idx.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                    let v = self.data.row_slice(i)[f];
                    (lo.min(v), hi.max(v))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }

        let (feature, lo, hi) = ranges[self.rng.random_range(0..ranges.len())];
        let u: f64 = self.rng.random();
        let mut value = lo + T::of(u) * (hi - lo);
        if value >= hi {
            value = lo;
        }

        let mut split = 0;
        for j in 0..idx.len() {
            if self.data.row_slice(idx[j])[feature] <= value {
                idx.swap(split, j);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }
}

impl<T: Scalar> IsolationForestModel<T> {
    pub fn trees(&self) -> &[IsolationTree<T>] {
        &self.trees
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    /// `c(psi)`, the per-tree path length normaliser.
    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn params(&self) -> &IForestParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn with_mode(mut self, mode: IForestMode) -> Self {
        self.params.mode = mode;
        self
    }

    /// Mean adjusted path length over the trees.
    pub fn mean_path_length(&self, x: &[T]) -> T {
        let total: T = self.trees.iter().map(|t| t.path_length(x)).sum();
        total / T::of(self.trees.len() as f64)
    }

    fn score_one(&self, x: &[T]) -> T {
        let two = T::of(2.0);
        match self.params.mode {
            IForestMode::Standard => two.powf(-self.mean_path_length(x) / self.normalizer),
            IForestMode::PaperLiteral => {
                let denom = T::of(self.trees.len() as f64) * self.normalizer;
                let sum: T = self
                    .trees
                    .iter()
                    .map(|t| two.powf(-T::of(t.depth(x).0 as f64) / denom))
                    .sum();
                T::of(-0.5) - sum
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BlobWriter::new(BLOB_MAGIC, BLOB_VERSION);
        w.u8(match self.params.mode {
            IForestMode::Standard => 0,
            IForestMode::PaperLiteral => 1,
        });
        w.u64(self.params.seed);
        w.u64(self.n_features as u64);
        w.u64(self.subsample as u64);
        w.u64(self.max_depth.map_or(u64::MAX, |d| d as u64));
        w.u64(self.trees.len() as u64);
        for tree in &self.trees {
            w.u64(tree.nodes.len() as u64);
            for node in &tree.nodes {
                match node {
                    TreeNode::Leaf { size } => {
                        w.u8(0);
                        w.u64(*size as u64);
                    }
                    TreeNode::Split {
                        feature,
                        value,
                        left,
                        right,
                    } => {
                        w.u8(1);
                        w.u64(*feature as u64);
                        w.f64(value.to_f64_lossless());
                        w.u64(*left as u64);
                        w.u64(*right as u64);
                    }
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BlobReader::new(bytes, BLOB_MAGIC, BLOB_VERSION)?;
        let mode = match r.u8()? {
            0 => IForestMode::Standard,
            1 => IForestMode::PaperLiteral,
            m => return Err(Error::Format(format!("unknown isolation forest mode {m}"))),
        };
        let seed = r.u64()?;
        let n_features = r.usize()?;
        let subsample = r.usize()?;
        let max_depth = match r.u64()? {
            u64::MAX => None,
            d => Some(d as usize),
        };
        let n_trees = r.usize()?;
        if n_trees == 0 || subsample < 2 || n_features == 0 {
            return Err(Error::Format("model blob has empty forest".into()));
        }
        let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
        for _ in 0..n_trees {
            let n_nodes = r.usize()?;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
            for _ in 0..n_nodes {
                nodes.push(match r.u8()? {
                    0 => TreeNode::Leaf { size: r.usize()? },
                    1 => {
                        let feature = r.usize()?;
                        let value = T::of(r.f64()?);
                        let left = r.usize()?;
                        let right = r.usize()?;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(Error::Format("model blob has dangling node".into()));
                        }
                        TreeNode::Split {
                            feature,
                            value,
                            left,
                            right,
                        }
                    }
                    t => return Err(Error::Format(format!("unknown node tag {t}"))),
                });
            }
            if nodes.is_empty() {
                return Err(Error::Format("model blob has empty tree".into()));
            }
            trees.push(IsolationTree::from_nodes(nodes));
        }
        r.finish()?;
        Ok(IsolationForestModel {
            trees,
            subsample,
            n_features,
            max_depth,
            normalizer: average_path_length(subsample),
            params: IForestParams {
                n_trees,
                subsample: Some(subsample),
                height_limit: max_depth.map_or(HeightLimit::Unbounded, HeightLimit::Fixed),
                mode,
                seed,
            },
        })
    }
}

/// Anomaly score per query row; higher = more anomalous in both modes.
pub fn iforest_score<T: Scalar>(model: &IsolationForestModel<T>, queries: &FeatureMatrix<T>) -> Result<ScoreVector<T>> {
    if queries.dim() != model.n_features {
        return Err(Error::Shape(format!(
            "model was fitted on {} features, queries have {}",
            model.n_features,
            queries.dim()
        )));
    }
    let scores = (0..queries.n_items())
        .into_par_iter()
        .map(|i| model.score_one(queries.row_slice(i)))
        .collect();
    Ok(ScoreVector::from_vec_unchecked(scores))
}
