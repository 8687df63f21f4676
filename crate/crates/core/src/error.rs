use std::io;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// A geometry violates a structural invariant (ring closure, minimum lengths, ...).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Column data cannot be reassembled into a geometry.
    #[error("structural error: {0}")]
    Structure(String),

    /// Bytes on disk do not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// Decoded data disagrees with its own metadata.
    #[error("corruption: {0}")]
    Corruption(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    /// A record was rejected by the writer.
    #[error("record {index}: {source}")]
    Record {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn corruption(msg: impl Into<String>) -> Self {
        Error::Corruption(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidGeometry(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    /// Prefixes on-disk errors with where they were found.
    pub(crate) fn at(self, location: impl std::fmt::Display) -> Self {
        match self {
            Error::Corruption(m) => Error::Corruption(format!("{location}: {m}")),
            Error::Format(m) => Error::Format(format!("{location}: {m}")),
            Error::Structure(m) => Error::Structure(format!("{location}: {m}")),
            other => other,
        }
    }
}
