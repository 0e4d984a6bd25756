use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the bench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("prediction window is cold ({filled}/{capacity} samples)")]
    ColdWindow { filled: usize, capacity: usize },

    #[error("{0} is undefined for this input")]
    Undefined(&'static str),

    #[error("training diverged at phase {phase}, iteration {iteration}: loss {loss}")]
    Diverged {
        phase: usize,
        iteration: usize,
        loss: f64,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("session: {0}")]
    Session(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
