use std::path::PathBuf;

/// Errors raised by the tracking core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: expected 9 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}: field `{field}` is not a valid number: {value:?}")]
    Parse {
        line: usize,
        field: &'static str,
        value: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent tracker input: {0}")]
    Consistency(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
