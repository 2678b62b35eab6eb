use std::path::PathBuf;

/// Broad failure classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A caller supplied an argument outside the operation's domain.
    Invalid,
    /// Input data is malformed or inconsistent.
    Data,
    /// A serialized artifact has the wrong magic, version or layout.
    Format,
    /// A computation produced a non-finite value.
    Numeric,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("data error: {0}")]
    Dataset(String),

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("architecture mismatch: file describes {found}, pipeline expects {expected}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("non-finite value {context}")]
    NonFinite { context: String },

    #[error("training origin leaked into evaluation set: {0}")]
    Leakage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid(_) => ErrorKind::Invalid,
            Error::Data { .. } | Error::Dataset(_) | Error::DegenerateLoop(_) | Error::Leakage(_) => ErrorKind::Data,
            Error::Format(_) | Error::ArchitectureMismatch { .. } => ErrorKind::Format,
            Error::NonFinite { .. } => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data { path: path.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
