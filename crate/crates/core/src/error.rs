use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval in dimension {dim}: lower {lower} > upper {upper}")]
    InvalidInterval { dim: usize, lower: f64, upper: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("negative enlargement buffer in dimension {dim}: {value}")]
    NegativeBuffer { dim: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot form {k} clusters from {m} points")]
    TooManyClusters { k: usize, m: usize },

    /// Nothing left to build a monitor from after label/score filtering.
    #[error("no usable feature vectors for {0}")]
    EmptyClass(String),

    #[error(
        "covariance for class {class:?} is not positive definite after adding {lambda:e}*I; \
         increase the regularization"
    )]
    SingularCovariance { class: String, lambda: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn mismatch(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    }
}
