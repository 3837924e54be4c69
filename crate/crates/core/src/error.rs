use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("environment generation failed after {attempts} rejections")]
    GenerationFailure { attempts: usize },

    #[error("goal-pool rollout did not reach the goal space within {actions} actions")]
    GoalPoolFailure { actions: usize },

    #[error("infeasible action: {0}")]
    InfeasibleAction(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("embedding index is empty")]
    EmptyIndex,

    #[error("{}:{line}: malformed file: {msg}", path.display())]
    MalformedFile {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: unsupported schema {found:?} (expected {expected:?})", path.display())]
    SchemaVersion {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("missing model: {0}")]
    MissingModel(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, msg: impl ToString) -> Self {
        Error::MalformedFile {
            path: path.into(),
            line,
            msg: msg.to_string(),
        }
    }
}
