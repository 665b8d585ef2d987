//! Crate-wide error type and the CLI exit-code contract.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("non-finite value at coordinate {index} in {context}")]
    NonFinite { context: String, index: usize },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("checkpoint has bad magic bytes")]
    CheckpointBadMagic,

    #[error("checkpoint schema version {found} unsupported (expected {expected})")]
    CheckpointSchemaVersion { found: u32, expected: u32 },

    #[error("checkpoint file is truncated")]
    CheckpointTruncated,

    #[error("checkpoint payload checksum mismatch")]
    CheckpointChecksum,

    #[error("malformed region file: {0}")]
    RegionFormat(String),

    #[error("malformed report: {0}")]
    ReportFormat(String),

    #[error("run directory `{0}` is not empty (pass --overwrite to replace it)")]
    RunDirNotEmpty(String),

    #[error("incompatible suites: {0}")]
    IncompatibleSuites(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn non_finite(context: impl Into<String>, index: usize) -> Self {
        Error::NonFinite {
            context: context.into(),
            index,
        }
    }

    /// Exit-code contract: 0 success, 2 configuration/usage, 3 numeric failure.
    /// Anything else (I/O and similar) maps to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::DimensionMismatch { .. }
            | Error::RunDirNotEmpty(_)
            | Error::IncompatibleSuites(_)
            | Error::RegionFormat(_)
            | Error::ReportFormat(_)
            | Error::CheckpointBadMagic
            | Error::CheckpointSchemaVersion { .. }
            | Error::CheckpointTruncated
            | Error::CheckpointChecksum => 2,
            Error::NonFinite { .. } | Error::Diverged { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
