use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input, failed validation, or a violated precondition.
    Input,
    /// Reading or writing a file failed.
    Io,
    /// The request would exceed a configured resource budget.
    Budget,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("exact solver limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("pair ({row}, {col}) failed: {source}")]
    Pair {
        row: String,
        col: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pooled cost matrix needs {required} bytes, budget is {budget} bytes")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: field `{field}`: {message}", path.display())]
    Manifest {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{}: schema mismatch: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("{0}")]
    Analysis(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::BudgetExceeded { .. } => ErrorClass::Budget,
            Error::Pair { source, .. } => source.class(),
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
