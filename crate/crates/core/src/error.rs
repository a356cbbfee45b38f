use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed PGM header: unexpected token `{token}`", path.display())]
    PgmHeader { path: PathBuf, token: String },

    #[error("{}: unsupported format: {reason}", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("{}: truncated pixel data: expected {expected} bytes, found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no files matching `{pattern}` in {}", dir.display())]
    EmptySequence { dir: PathBuf, pattern: String },

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("row {row} out of range ({rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("power fault: MRAM accessed while powered off")]
    PowerFault,

    #[error("no calibration data for {0}")]
    Calibration(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("{}: line {line}: {reason}", path.display())]
    Trace {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
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
}
