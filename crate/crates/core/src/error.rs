use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by parsers and metric computations.
///
/// Variants that come from reading a file carry the path and the 1-based
/// line number so the CLI can point at the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line count mismatch: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines}")]
    LineCountMismatch {
        src_path: PathBuf,
        src_lines: usize,
        tgt_path: PathBuf,
        tgt_lines: usize,
    },

    #[error("{path}:{line}: empty line")]
    EmptyLine { path: PathBuf, line: usize },

    #[error("malformed alignment token {token:?} at position {index} (1-based): {reason}")]
    Pharaoh {
        index: usize,
        token: String,
        reason: &'static str,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("alignment link ({src}, {tgt}) out of bounds for pair of lengths ({src_len}, {tgt_len})")]
    LinkOutOfBounds {
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the environment rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
