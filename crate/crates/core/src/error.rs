use std::path::PathBuf;

/// Errors raised anywhere in the lab.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("gradient tape has no recorded forward pass")]
    TapeEmpty,
    #[error("gradient tape was already consumed by a backward pass")]
    TapeConsumed,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("sequence too short: need at least {need} actions, got {got}")]
    SequenceTooShort { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("episode is finished; reset before stepping")]
    EpisodeDone,
    #[error("replay buffer holds {available} valid triples, {requested} requested")]
    InsufficientData { available: usize, requested: usize },
    #[error("batch lacks previous states required by {0}")]
    MissingPrevState(&'static str),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training aborted: {0}")]
    Aborted(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("corrupt or missing manifest at {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("incomparable runs: {0}")]
    Incomparable(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::Malformed(_)
                | Error::Manifest { .. }
                | Error::Incomparable(_)
                | Error::SequenceTooShort { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
