use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Core(#[from] orbitfit_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{path}: schema version {found} is newer than supported version {supported}")]
    SchemaVersion { path: PathBuf, found: u32, supported: u32 },

    #[error("unknown plate '{0}'")]
    UnknownPlate(String),

    #[error("duplicate plate id '{0}'")]
    DuplicatePlate(String),

    #[error("rejected transform: {0}")]
    RejectedTransform(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, SessionError>;

impl SessionError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SessionError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn manifest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        SessionError::Manifest {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, SessionError::Io { .. } | SessionError::Core(orbitfit_core::Error::Io { .. }))
    }

    /// Process exit code: 1 for I/O failures, 2 for contract violations.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            1
        } else {
            2
        }
    }
}
