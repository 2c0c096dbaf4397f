use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported dtype `{0}` (expected <f4, <f8 or |u1)")]
    UnsupportedDtype(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("missing file referenced by manifest: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("probability mode mismatch: {0}")]
    Mode(String),

    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("cannot fit model: {0}")]
    Fit(String),

    #[error("labels must contain both classes (positives: {n_pos}, negatives: {n_neg})")]
    DegenerateLabels { n_pos: usize, n_neg: usize },

    #[error("score/label alignment failed at id `{0}`")]
    Alignment(String),
}

impl Error {
    /// Stable name of the error category, used in command-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Format(_) => "FormatError",
            Error::UnsupportedDtype(_) => "UnsupportedDtype",
            Error::Truncation { .. } => "TruncationError",
            Error::Validation(_) => "ValidationError",
            Error::UnsupportedImage(_) => "UnsupportedImage",
            Error::Manifest(_) => "ManifestError",
            Error::MissingFile(_) => "MissingFileError",
            Error::Mode(_) => "ModeError",
            Error::Index { .. } => "IndexError",
            Error::Shape(_) => "ShapeError",
            Error::Config(_) => "ConfigError",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::Fit(_) => "FitError",
            Error::DegenerateLabels { .. } => "DegenerateLabels",
            Error::Alignment(_) => "AlignmentError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
