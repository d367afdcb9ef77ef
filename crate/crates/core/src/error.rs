use std::io;

use crate::ids::NamespaceClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed identifier {input:?}: unexpected input at position {position}")]
    MalformedIdentifier { input: String, position: usize },

    #[error("identifiers of class {0:?} are never minted")]
    InvalidClass(NamespaceClass),

    #[error("expected an identifier of class {expected:?}, got {found}")]
    WrongClass { expected: NamespaceClass, found: String },

    #[error("malformed content identifier {0:?}")]
    MalformedContentId(String),

    #[error("write-once violation: {0}")]
    WriteOnceViolation(String),

    #[error("writer is sealed")]
    Sealed,

    #[error("invalid media type {0:?}")]
    InvalidMediaType(String),

    #[error("scan error at byte {offset}{}: {message}", ordinal.map(|o| format!(" (record {o})")).unwrap_or_default())]
    Scan { offset: u64, ordinal: Option<u64>, message: String },

    #[error("extent {offset}+{length} is out of bounds for a file of {size} bytes")]
    OutOfBounds { offset: u64, length: u64, size: u64 },

    #[error("corrupt record at byte {offset}: {message}")]
    CorruptRecord { offset: u64, message: String },

    #[error("corrupt extent at byte {offset}: {message}")]
    CorruptExtent { offset: u64, message: String },

    #[error("duplicate key {0:?}")]
    DuplicateKey(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("payload error: {0}")]
    Payload(String),

    #[error("invalid range: from {from} is after until {until}")]
    InvalidRange { from: String, until: String },

    #[error("invalid base URL {0:?}")]
    InvalidBase(String),

    #[error("invalid timestamp {0:?}")]
    InvalidTimestamp(String),

    #[error("locator conflict: {0}")]
    Conflict(String),

    #[error("stale index {path}: {message}")]
    StaleIndex { path: String, message: String },

    #[error("malformed index {path} line {line}: {message}")]
    MalformedIndex { path: String, line: usize, message: String },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn scan(offset: u64, ordinal: Option<u64>, message: impl Into<String>) -> Self {
        Error::Scan { offset, ordinal, message: message.into() }
    }

    pub(crate) fn payload(message: impl Into<String>) -> Self {
        Error::Payload(message.into())
    }
}
