//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: configuration
//! and usage problems (exit 1), data and format problems (exit 2), and
//! degenerate pipeline states (exit 3). Library callers just get a single
//! enum with enough payload to diagnose failures programmatically.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- configuration / usage ---
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // --- data / format ---
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported container version {found} (this build reads version {supported})")]
    UnsupportedVersion { path: PathBuf, found: u16, supported: u16 },

    #[error("{path}: malformed container at byte {offset}: {detail}")]
    Malformed { path: PathBuf, offset: u64, detail: String },

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite values: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("fingerprint mismatch: artifact was fitted with config {artifact}, current config is {current} (pass the override flag to evaluate anyway)")]
    FingerprintMismatch { artifact: String, current: String },

    // --- degenerate pipeline states ---
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Io { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Malformed { .. }
            | Error::InvalidSkeleton(_)
            | Error::ShapeMismatch(_)
            | Error::NonFinite(_)
            | Error::EmptyInput(_)
            | Error::FingerprintMismatch { .. } => 2,
            Error::Diverged { .. } | Error::DegenerateClustering(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
