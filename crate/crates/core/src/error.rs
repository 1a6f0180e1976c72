use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field is missing, malformed or unresolvable.
    #[error("config error: {0}")]
    Config(String),

    /// The update produced a non-finite value.
    #[error("numerical failure at step {step}, cell {cell}: value {value}")]
    Numerical { step: u64, cell: i64, value: f64 },

    /// The reference solution a sweep entry is measured against failed.
    #[error("reference run failed: {0}")]
    Reference(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 for anything environmental.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::Numerical { .. } | Error::Reference(_) => 3,
            Error::Io { .. } => 1,
        }
    }
}
