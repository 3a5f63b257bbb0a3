use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error{}: {source}", path.as_ref().map(|p| format!(" ({})", p.display())).unwrap_or_default())]
    Io {
        #[source]
        source: std::io::Error,
        path: Option<PathBuf>,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("truncated {what}: needed {need} more bytes at byte offset {offset}")]
    Truncated {
        what: &'static str,
        offset: usize,
        need: usize,
    },

    #[error("trailing data past expected end at byte offset {offset}")]
    TrailingBytes { offset: usize },

    #[error("zero {what} in header")]
    ZeroDim { what: &'static str },

    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    #[error("no voxels survived filtering")]
    EmptyVoxelSet,

    #[error("zero-variance input, correlation undefined")]
    ZeroVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("node id {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("labels contain a single class, need both")]
    SingleClass,

    #[error("class {label} has only {count} graphs, need at least {min}")]
    ClassTooSmall { label: u8, count: usize, min: usize },

    #[error("non-finite value in model stage {layer}")]
    NumericFailure { layer: usize },

    #[error("every grid cell failed numerically")]
    GridExhausted,
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { source, path: None }
    }
}

impl Error {
    pub(crate) fn io(source: std::io::Error, path: impl Into<PathBuf>) -> Self {
        Error::Io {
            source,
            path: Some(path.into()),
        }
    }

    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
