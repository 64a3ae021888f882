use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("autodiff: {0}")]
    Autodiff(String),

    #[error("failed to parse {what}: field `{field}`: {message}")]
    Parse {
        what: &'static str,
        field: String,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported hypervolume dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("training diverged at batch {batch}: {detail}")]
    NonFinite { batch: usize, detail: String },

    #[error("i/o error on {path}: {source}")]
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

    /// Maps a serde_json error onto `Error::Parse`, pulling the field name out of
    /// "missing field `x`" / "unknown field `x`" messages when present.
    pub(crate) fn from_json(what: &'static str, err: &serde_json::Error) -> Self {
        let message = err.to_string();
        let field = message
            .split('`')
            .nth(1)
            .map(str::to_owned)
            .unwrap_or_else(|| "<document>".to_owned());
        Error::Parse {
            what,
            field,
            message,
        }
    }
}
