use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("backward requires a scalar root, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },

    #[error("unknown tape node {0}")]
    UnknownNode(usize),

    #[error("non-finite value in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("{path}: row {row}: {msg}")]
    Parse { path: PathBuf, row: usize, msg: String },

    #[error("{path}: missing declared column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("zero-norm embedding for sensor {0}")]
    ZeroNorm(usize),

    #[error("sensor {0} has no candidate neighbors")]
    EmptyCandidates(usize),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("corrupt {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("sensor mismatch between checkpoint and dataset: {0}")]
    SensorMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
