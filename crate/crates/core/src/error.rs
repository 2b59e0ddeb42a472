use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Array or layer dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid configuration or parameter value.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was invoked in the wrong lifecycle state
    /// (backward before forward, transform before fit).
    #[error("invalid state: {0}")]
    State(String),

    /// Not enough records or samples for the requested operation.
    #[error("sizing error: {0}")]
    Sizing(String),

    /// Input data failed validation. Each entry names one offending row.
    #[error("ingestion error in {path}: {}", .problems.join("; "))]
    Ingest { path: String, problems: Vec<String> },

    #[error("training aborted at epoch {epoch}, batch {batch} (lr {lr:e}): {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        lr: f64,
        reason: String,
    },

    #[error("artifact format version {found} is incompatible with supported version {supported}")]
    Version { found: u32, supported: u32 },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

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

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for this error: 3 for runtime training failures,
    /// 2 for everything attributable to configuration or input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Training { .. } => 3,
            _ => 2,
        }
    }
}
