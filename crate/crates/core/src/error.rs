use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so the command-line front end can map them onto
/// process exit codes (config, data, divergence).
#[derive(Debug, Error)]
pub enum KgcmError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Divergence { epoch: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl KgcmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KgcmError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the `kgcm` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            KgcmError::Config(_) | KgcmError::InvalidArgument(_) => 1,
            KgcmError::Divergence { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, KgcmError>;
