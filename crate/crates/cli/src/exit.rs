use std::fmt;

use tsscale_core::{Error, ErrorClass};

pub const OK: i32 = 0;
pub const CONFIG: i32 = 2;
pub const INGESTION: i32 = 3;
pub const NUMERICAL: i32 = 4;
pub const INTERNAL: i32 = 5;

/// An error with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(CONFIG, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(INTERNAL, message)
    }

    /// Wraps a library error raised while running `stage` on `label`.
    /// Ingestion failures keep their own code; bad arguments met inside an
    /// analysis stage count as numerical-stage failures.
    pub fn stage(stage: &str, label: &str, err: Error) -> Self {
        let code = match err.class() {
            ErrorClass::Ingestion => INGESTION,
            ErrorClass::Input | ErrorClass::Numerical => {
                if stage == "ingest" || stage == "resample" {
                    INGESTION
                } else {
                    NUMERICAL
                }
            }
            ErrorClass::Output => INTERNAL,
        };
        Self::new(code, format!("stage `{stage}` failed for `{label}`: {err}"))
    }

    pub fn output(err: Error) -> Self {
        Self::new(INTERNAL, format!("writing output failed: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
