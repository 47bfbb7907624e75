use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mask is empty")]
    EmptyMask,

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("RLE parse error at character {position}: {message}")]
    RleParse { position: usize, message: String },

    #[error("underdetermined fit: {count} samples for {components} components")]
    Underdetermined { count: u64, components: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: u64, found: u64 },

    #[error("JSON parse error at byte {offset}: {message}")]
    Json { offset: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
