use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by geometry, registration and fit operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient landmarks: {found} matched pairs, need at least {required}")]
    InsufficientLandmarks { found: usize, required: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("reflection collapse: affine determinant {det:.6e} is not positive")]
    ReflectionCollapse { det: f64 },

    #[error("numeric failure at iteration {iteration}: {message}")]
    NumericFailure { iteration: usize, message: String },

    #[error("placement has no pivot; run posterior-stop alignment first")]
    MissingPivot,

    #[error("placement history has no posterior-stop alignment to reset to")]
    MissingHistory,

    #[error("invalid plate {plate}: {message}")]
    InvalidPlate { plate: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    /// True for failures caused by the caller's data rather than the
    /// environment. Front ends use this to pick exit codes and statuses.
    pub fn is_contract_violation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
