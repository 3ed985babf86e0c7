use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    /// An input lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of the operation was not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The least-squares minimum sits on the edge of the search grid.
    #[error("fit range error: {0}")]
    FitRange(String),

    /// A fit could not be carried out (degenerate design, too few points).
    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),
}

impl SimError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        SimError::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        SimError::Precondition(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        SimError::Validation {
            field: field.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for SimError {
    fn from(e: serde_json::Error) -> Self {
        SimError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
