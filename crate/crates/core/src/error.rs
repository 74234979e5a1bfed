use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("utterance '{id}': {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },

    /// Audio container or encoding problem. `field` names the offending header field.
    #[error("unsupported or corrupt audio ({field}): {message}")]
    Format {
        field: &'static str,
        message: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("cost function returned non-finite value {value} at position {position:?}")]
    NonFiniteCost { value: f64, position: Vec<f64> },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(String),

    #[error("internal error: {0}")]
    Internal(String),
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

    pub(crate) fn in_utterance(self, id: &str) -> Self {
        Error::Utterance {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            Error::Utterance { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
