use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("distribution {0} is not well-invertible")]
    NotInvertible(String),

    #[error("distribution {0} has no density")]
    NoDensity(String),

    #[error("dimension {dim} exceeds the enumeration limit of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("tuple {tuple}: {reason}")]
    Tuple { tuple: String, reason: String },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("invalid learning rate schedule: {0}")]
    Schedule(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{method}, trial {trial}, step {step}: {source}")]
    Trial {
        method: String,
        trial: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
