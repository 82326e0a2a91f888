use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to load {channel} from {path}: {reason}")]
    Load {
        path: PathBuf,
        channel: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    Dimension {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("image encoding error on {path}: {reason}")]
    Encode { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(
        path: impl Into<PathBuf>,
        channel: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Load {
            path: path.into(),
            channel: channel.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Load { .. } => "load",
            Error::Config(_) => "config",
            Error::Parameter(_) => "parameter",
            Error::Calibration(_) => "calibration",
            Error::Dimension { .. } => "dimension",
            Error::Encode { .. } => "encode",
        }
    }
}
