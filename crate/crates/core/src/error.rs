use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is rank deficient: |r[{index}][{index}]| = {value:e} below tolerance {tolerance:e}")]
    RankDeficient {
        index: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {deviation:e}")]
    NotSymmetric { row: usize, col: usize, deviation: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need at least 2 training samples, got {0}")]
    InsufficientSamples(usize),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("unsupported npy dtype {0:?} (expected '<f4')")]
    UnsupportedDtype(String),

    #[error("unsupported npy memory order: fortran_order arrays are rejected")]
    UnsupportedOrder,

    #[error("malformed npy header: {0}")]
    MalformedHeader(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid scores: {0}")]
    InvalidScores(String),

    #[error("no anomalous region in the ground truth masks")]
    NoAnomalousRegion,

    #[error("no normal pixel in the ground truth masks")]
    NoNormalPixel,

    #[error("ground truth contains a single class")]
    SingleClass,

    #[error("score/mask pairing failed: {0}")]
    PairingError(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Data,
    Numerical,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Validation,
            Error::RankDeficient { .. }
            | Error::NotSymmetric { .. }
            | Error::NotPositiveDefinite { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
