use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into two families: [`Error::Io`] for filesystem trouble and
/// everything else for data that violates a contract. The CLI maps the two
/// families onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{which} vector is all zeros")]
    ZeroVector { which: &'static str },

    #[error("length mismatch: {what} has {left} entries, expected {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{what} is empty")]
    Empty { what: &'static str },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: field \"{field}\": {reason}")]
    Schema {
        line: usize,
        field: String,
        reason: String,
    },

    #[error("record {record}: {reason}")]
    Record { record: usize, reason: String },

    #[error("no ground truth for query {qid}")]
    UnknownQuery { qid: String },
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for filesystem errors, false for validation errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
