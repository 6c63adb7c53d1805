use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error families. The CLI maps them onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Numeric,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Numeric => 3,
            Category::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("dimension {dimension} is constant; cannot split it into {k} bins")]
    DegenerateDimension { dimension: usize, k: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("malformed structure `{spec}` at position {position}: {message}")]
    Structure {
        spec: String,
        position: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::NonFiniteGradient { .. } | Error::Numeric(_) | Error::Diverged { .. } => {
                Category::Numeric
            }
            Error::Io { .. } => Category::Io,
            Error::Csv(e) if e.is_io_error() => Category::Io,
            _ => Category::Config,
        }
    }
}
