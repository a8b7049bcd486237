use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = NfsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NfsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical instability in slab {slab} at t = {time_ns} ns")]
    Instability { slab: usize, time_ns: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not enough temporal nodes: need {needed}, found {found}")]
    InsufficientNodes { needed: usize, found: usize },

    #[error("peak analysis failed: {0}")]
    Peak(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NfsError {
    pub fn config(msg: impl Into<String>) -> Self {
        NfsError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NfsError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            NfsError::Config(_) | NfsError::Domain(_) | NfsError::InsufficientNodes { .. } => 2,
            NfsError::Instability { .. } | NfsError::Peak(_) => 3,
            NfsError::Io { .. } => 4,
        }
    }
}
