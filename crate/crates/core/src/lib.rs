//! Out-of-distribution scoring, detector evaluation and DeepAugment-style
//! image augmentation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the command-line
//! tool uses.

pub mod deepaugment;
pub mod detectors;
pub mod metrics;
pub mod outlier_models;
pub mod error;
pub mod rng;
pub mod scalar;
pub mod tensorio;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LogitMatrix = detectors::LogitMatrix<f64>;
pub type ProbMatrix = detectors::ProbMatrix<f64>;
pub type ScoreVector = detectors::ScoreVector<f64>;
pub type TypicalityMatrix = detectors::TypicalityMatrix<f64>;
pub type ClassTemplates = detectors::ClassTemplates<f64>;
pub type SegScoreMap = detectors::SegScoreMap<f64>;
pub type ImageTensor = tensorio::ImageTensor<f64>;

pub type LogitMatrixF32 = detectors::LogitMatrix<f32>;
pub type ProbMatrixF32 = detectors::ProbMatrix<f32>;
pub type ScoreVectorF32 = detectors::ScoreVector<f32>;
pub type ImageTensorF32 = tensorio::ImageTensor<f32>;
