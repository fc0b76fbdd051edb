use std::path::PathBuf;

/// Errors produced by the selection toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid embedding file: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("documents without gold label: {0:?}")]
    MissingLabels(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("session is {0}")]
    SessionNotActive(&'static str),

    #[error("out-of-order annotation: expected {expected:?}, got {got:?}")]
    OutOfOrder { expected: String, got: String },

    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
