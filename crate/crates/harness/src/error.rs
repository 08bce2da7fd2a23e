use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    InvalidConfig { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: bad tensor file: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("cannot compare runs: {0}")]
    Compare(String),

    #[error(transparent)]
    Model(#[from] vidtldr_core::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } => 2,
            HarnessError::InvalidConfig { .. } => 3,
            HarnessError::Io { .. } => 4,
            HarnessError::Format { .. } => 5,
            HarnessError::Compare(_) => 6,
            HarnessError::Model(_) => 7,
        }
    }
}
