use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed career for worker {worker_id}: {reason}")]
    MalformedCareer { worker_id: u64, reason: String },

    #[error("age {age} outside [{entry}, {exit}]")]
    AgeOutOfRange { age: u32, entry: u32, exit: u32 },

    #[error("non-finite truncation bound")]
    NonFiniteBound,

    #[error("missing gamma cell (age group {age_group}, {from} -> {to})")]
    MissingCell {
        age_group: usize,
        from: usize,
        to: usize,
    },

    #[error("insufficient lagged choices: {0}")]
    InsufficientLags(String),

    #[error("no identifying variation: {0}")]
    NoIdentifyingVariation(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Io { .. } | Error::Csv { .. } => 4,
            _ => 3,
        }
    }
}
