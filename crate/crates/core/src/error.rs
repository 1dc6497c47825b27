use thiserror::Error;

/// Errors raised by the state kernel, the samplers and the experiment engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("Gaussian draw returned a zero vector twice in a row")]
    DegenerateDraw,

    #[error("non-finite value in trial {trial} (stream {stream})")]
    NonFinite { trial: u64, stream: u64 },

    #[error("worker pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad user input (usage, domain, parse) rather
    /// than by an internal failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidDimensions(_)
                | Error::Domain(_)
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
