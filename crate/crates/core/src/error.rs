use std::io;

use thiserror::Error;

/// Errors produced by the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("region has no pixels")]
    EmptyRegion,
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("kernel size must be odd, got {0}")]
    EvenKernel(usize),
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("need at least {required} nodes, got {got}")]
    TooFewNodes { required: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
