use std::path::PathBuf;

use shiftrec_core::ErrorKind;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DOMAIN: i32 = 3;
    pub const CONVERGENCE: i32 = 4;
    pub const PROPERTY_VIOLATION: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] shiftrec_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An audit's precondition does not hold for the input.
    #[error("precondition not met: {0}")]
    Precondition(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) => match e.kind() {
                ErrorKind::Config | ErrorKind::Parse | ErrorKind::Io => exit::CONFIG,
                ErrorKind::Domain => exit::DOMAIN,
                ErrorKind::Convergence => exit::CONVERGENCE,
            },
            HarnessError::Io { .. } | HarnessError::Json(_) | HarnessError::Config(_) => exit::CONFIG,
            HarnessError::Precondition(_) => exit::DOMAIN,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
