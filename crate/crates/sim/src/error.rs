use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] congestion_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown built-in game {0:?} (available: example-network)")]
    UnknownGame(String),

    #[error("game spec {path}: {source}")]
    Spec {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed trajectory CSV {path}: {reason}")]
    CsvFormat { path: PathBuf, reason: String },

    #[error("iteration {tau}: {source}")]
    Iteration {
        tau: usize,
        #[source]
        source: congestion_core::Error,
    },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> SimError {
        let path = path.into();
        move |source| SimError::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> SimError {
        let path = path.into();
        move |source| SimError::Csv { path, source }
    }
}
