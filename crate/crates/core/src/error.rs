use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or corrupt encoding: {0}")]
    Format(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("window at ({row}, {col}) with side {window} leaves the {height}x{width} image")]
    Bounds {
        row: usize,
        col: usize,
        window: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("graph mismatch: {0}")]
    GraphMismatch(String),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("({row}, {col}) is not an admissible center")]
    InvalidCenter { row: usize, col: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format(_) => 2,
            Error::InvalidCenter { .. } => 4,
            _ => 3,
        }
    }
}
