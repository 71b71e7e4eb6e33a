use std::path::PathBuf;

use thiserror::Error;

use crate::pso::ModelConfig;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in layer {layer} at step {step}")]
    Numeric { layer: usize, step: usize },

    #[error("parameter vector has length {got}, layout expects {expected}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("fitness evaluation failed for particle {particle}: {source}")]
    Fitness {
        particle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation of {config} failed: {source}")]
    Evaluation {
        config: ModelConfig,
        #[source]
        source: Box<Error>,
    },

    #[error("client {client} failed: {source}")]
    Client {
        client: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("series of length {len} is too short for lookback {lookback}")]
    SeriesTooShort { len: usize, lookback: usize },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected exactly 5 values, got {0}")]
    ConfidenceInterval(usize),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
