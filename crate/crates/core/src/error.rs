use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("invalid error model: {0}")]
    InvalidErrorModel(String),

    #[error("sample {sample} has zero likelihood under the current belief")]
    ZeroLikelihood { sample: i64 },

    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("uniform phase length {h} is not a multiple of {pairs} alternative-attribute pairs")]
    NotMultiple { h: usize, pairs: usize },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("unknown problem set {0:?}")]
    UnknownSet(String),

    #[error("need at least 2 observations per group, got {n}")]
    InsufficientData { n: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
