use thiserror::Error;

/// Errors produced by the conformal pipeline, the environments and the
/// experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rolling window holds no scores")]
    EmptyWindow,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient calibration: need index {needed} but only {available} scores")]
    InsufficientCalibration { needed: usize, available: usize },

    #[error("stream exhausted")]
    StreamExhausted,

    #[error("insufficient history: need {needed} steps, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("run contains no step records")]
    EmptyRun,

    #[error("local coverage window {window} exceeds run length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("missing runs for: {}", .0.join(", "))]
    MissingRuns(Vec<String>),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
