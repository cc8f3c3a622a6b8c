use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("pairwise term ({0},{0}) couples a variable with itself")]
    SelfPair(usize),

    #[error("variable {variable}: label index {label} outside domain of size {size}")]
    OutOfDomain { variable: usize, label: usize, size: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation expects the {expected} variant, profile is {found}")]
    VariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("table for variable {0} has no positive entry")]
    AllZero(usize),

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
