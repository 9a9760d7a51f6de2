use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{what} needs {n_qubits} qubits, above the dense limit of {limit}")]
    ResourceLimit {
        what: &'static str,
        n_qubits: usize,
        limit: usize,
    },

    #[error("unsupported spin sector: {0}")]
    UnsupportedSector(String),

    #[error("penalty weight must be below 1, got {0}")]
    InvalidPenalty(f64),

    #[error("sector labelling failed: {0}")]
    LabelingFailure(String),

    #[error("{path}: parse error at `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Validation { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
