use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the scene QA engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate quaternion (norm {0:e})")]
    DegenerateQuaternion(f64),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("zero-length embedding vector")]
    ZeroEmbedding,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("dangling instance `{0}` referenced by question")]
    DanglingInstance(String),

    #[error("empty index")]
    EmptyIndex,

    #[error("insufficient scene: {0}")]
    InsufficientScene(String),

    #[error("corpus does not match database: {0}")]
    CorpusMismatch(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("network error: {0}")]
    Network(#[from] std::io::Error),

    #[error("answerer backend error: {0}")]
    Backend(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
