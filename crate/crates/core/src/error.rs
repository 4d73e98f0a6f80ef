use std::io;

use thiserror::Error;

/// Errors produced anywhere in the runtime.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("layer `{layer}` requires weight `{key}`, which is missing from the store")]
    MissingWeight { layer: String, key: String },

    #[error("weight `{key}` has dims {found:?}, expected {expected:?}")]
    WeightShape {
        key: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("not a weight bundle")]
    NotABundle,

    #[error("unsupported bundle version {0} (this build reads version 1)")]
    UnsupportedVersion(u32),

    #[error("bundle checksum mismatch: expected {expected:#010x}, found {found:#010x}")]
    Checksum { expected: u32, found: u32 },

    #[error("bundle truncated at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("malformed bundle: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
