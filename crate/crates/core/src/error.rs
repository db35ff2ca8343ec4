use std::path::PathBuf;

use thiserror::Error;

/// Identifies which belief became all-zero during an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Target,
    Sensor(usize),
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variable::Target => write!(f, "target"),
            Variable::Sensor(n) => write!(f, "sensor {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cell id {id} (map has {cells} cells)")]
    InvalidCell { id: usize, cells: usize },

    #[error("invalid cell map: {0}")]
    InvalidMap(String),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid slot input: {0}")]
    InvalidInput(String),

    #[error("belief collapse at slot {slot}: {variable} belief is identically zero")]
    BeliefCollapse { slot: usize, variable: Variable },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
