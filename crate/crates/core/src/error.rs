use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the completion engine and its data loaders.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid subtensor order k={k} for a {d}-dimensional tensor (need 1 <= k < d)")]
    InvalidOrder { k: usize, d: usize },

    #[error("coordinate {coord:?} is out of bounds for shape {shape:?}")]
    OutOfBounds { coord: Vec<usize>, shape: Vec<usize> },

    #[error("coordinate {0:?} appears more than once")]
    DuplicateCoord(Vec<usize>),

    #[error("non-finite value {value} at {coord:?}")]
    NonFinite { coord: Vec<usize>, value: f64 },

    #[error("shift vector has {actual} coefficients, catalog has {expected} subtensors")]
    ShiftLength { expected: usize, actual: usize },

    #[error("canonical shifting did not converge after {sweeps} sweeps (last sweep variance {variance:e})")]
    NotConverged { sweeps: usize, variance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed consensus pattern: {0}")]
    MalformedPattern(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Parse,
    Io,
    Domain,
    Convergence,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidShape(_)
            | Error::InvalidOrder { .. }
            | Error::ShiftLength { .. }
            | Error::InvalidConfig(_)
            | Error::MalformedPattern(_) => ErrorKind::Config,
            Error::OutOfBounds { .. } | Error::DuplicateCoord(_) | Error::NonFinite { .. } => {
                ErrorKind::Parse
            }
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Io { .. } => ErrorKind::Io,
            Error::Domain(_) => ErrorKind::Domain,
            Error::NotConverged { .. } => ErrorKind::Convergence,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
