use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated WAV data: {0}")]
    TruncatedData(String),

    #[error("contour schema violation: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("{levels} decomposition levels need at least {needed} samples, got {len}")]
    LevelTooLarge {
        levels: usize,
        len: usize,
        needed: usize,
    },

    #[error("inconsistent wavelet coefficients: {0}")]
    InconsistentCoefficients(String),

    #[error("contour has no voiced frames")]
    NoVoicedFrames,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("analysis window too short or unvoiced: {0}")]
    BadWindow(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
