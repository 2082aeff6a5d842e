use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    /// Hoyer sparsity is undefined for an all-zero activation.
    #[error("activation is identically zero")]
    DegenerateActivation,

    #[error("input vector has zero norm")]
    DegenerateInput,

    #[error("malformed IDX file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 2 configuration, 3 data ingestion,
    /// 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_) | Error::Config(_) | Error::Domain(_) => 2,
            Error::Format { .. } | Error::Io { .. } | Error::DegenerateInput => 3,
            Error::DegenerateActivation | Error::Numerical(_) => 4,
        }
    }
}
