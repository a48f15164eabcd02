use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or violated preconditions.
    Input,
    /// Reading or parsing a data file.
    Ingestion,
    /// An estimator could not produce a result.
    Numerical,
    /// Filesystem or serialization failure while writing outputs.
    Output,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: csv error: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}: cannot parse {what} `{text}`")]
    Parse {
        path: PathBuf,
        row: usize,
        what: &'static str,
        text: String,
    },

    #[error("{path}: timestamps not strictly increasing at row {row} ({prev} -> {next})")]
    NonMonotoneTimestamps {
        path: PathBuf,
        row: usize,
        prev: f64,
        next: f64,
    },

    #[error("{path}: gap at row {row}: timestamp jumps {from} -> {to} (expected step {step} s)")]
    Gap {
        path: PathBuf,
        row: usize,
        from: f64,
        to: f64,
        step: f64,
    },

    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_) | Error::ZeroVariance(_) => ErrorClass::Input,
            Error::Read { .. }
            | Error::Csv { .. }
            | Error::MissingColumn { .. }
            | Error::Parse { .. }
            | Error::NonMonotoneTimestamps { .. }
            | Error::Gap { .. } => ErrorClass::Ingestion,
            Error::Numerical(_) => ErrorClass::Numerical,
            Error::Io { .. } | Error::Json(_) => ErrorClass::Output,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InvalidInput(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
