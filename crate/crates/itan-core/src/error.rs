//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("non-finite loss at episode {episode}: {value}")]
    NonFiniteLoss { episode: u64, value: f64 },

    #[error("split error: {0}")]
    Split(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("bad magic: found {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    BadVersion { found: u16, expected: u16 },

    #[error("truncated file at byte offset {offset}: needed {needed} more bytes")]
    Truncated { offset: u64, needed: u64 },

    #[error("invalid precision flag {0}")]
    BadPrecisionFlag(u8),

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("benchmark error: {0}")]
    Bench(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. }
            | Error::AxisOutOfRange { .. }
            | Error::InvalidShape(_)
            | Error::LabelOutOfRange { .. }
            | Error::NonScalarLoss { .. } => "numerics",
            Error::NonFiniteLoss { .. } => "training",
            Error::Split(_) | Error::Sampling(_) => "protocol",
            Error::BadMagic { .. }
            | Error::BadVersion { .. }
            | Error::Truncated { .. }
            | Error::BadPrecisionFlag(_)
            | Error::DimensionOverflow(_) => "format",
            Error::Manifest(_) => "manifest",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Bench(_) => "bench",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
