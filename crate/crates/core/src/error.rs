use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed PGM: {0}")]
    Format(String),

    #[error("truncated PGM raster: expected {expected} pixels, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unsupported PGM depth: maxval {0} exceeds 255")]
    UnsupportedDepth(u32),

    #[error("intensity {value} at index {index} is not 0 or 255")]
    NotBinary { index: usize, value: u8 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("no face region: binarized image has no foreground")]
    NoFace,

    #[error("mask eroded to empty after {iterations} iteration(s)")]
    ErodedToEmpty { iterations: usize },

    #[error("point ({row}, {col}) outside {height}x{width} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("class {label} has {count} sample(s); at least 2 are required")]
    InsufficientData { label: usize, count: usize },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {what}: {msg}")]
    Parse { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Parse {
            what,
            msg: msg.into(),
        }
    }
}
