use std::fmt;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes of operands do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error(transparent)]
    Text(#[from] TextError),

    #[error("trial {trial} references unknown utterance {utt}")]
    MissingUtterance { trial: String, utt: String },

    /// Every trial reference that could not be resolved, reported together.
    #[error("{total} trial reference(s) to unknown utterances: {listing}")]
    MissingUtterances { total: usize, listing: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}

/// Failure while decoding one of the binary formats (embedding store, checkpoint).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte offset {offset}")]
pub struct DecodeError {
    pub kind: DecodeErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeErrorKind {
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    UnsupportedVersion(u32),
    Truncated { needed: usize, available: usize },
    Dimension(String),
    InvalidUtf8,
    InvalidTag { field: &'static str, value: u8 },
    NonFinite,
    DuplicateId(String),
    Inconsistent(String),
    TrailingBytes(usize),
}

impl fmt::Display for DecodeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DecodeErrorKind::*;
        match self {
            BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ),
            UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            Truncated { needed, available } => {
                write!(f, "truncated: needed {needed} bytes, {available} available")
            }
            Dimension(msg) => write!(f, "dimension inconsistency: {msg}"),
            InvalidUtf8 => write!(f, "invalid UTF-8 string"),
            InvalidTag { field, value } => write!(f, "invalid {field} tag {value}"),
            NonFinite => write!(f, "non-finite value"),
            DuplicateId(id) => write!(f, "duplicate utterance id {id:?}"),
            Inconsistent(msg) => write!(f, "inconsistent record: {msg}"),
            TrailingBytes(n) => write!(f, "{n} trailing bytes after last record"),
        }
    }
}

/// Failure while parsing one of the line-oriented text formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{source_name}:{line}: {message}")]
pub struct TextError {
    pub source_name: &'static str,
    pub line: usize,
    pub message: String,
}

impl TextError {
    pub(crate) fn new(source_name: &'static str, line: usize, message: impl Into<String>) -> Self {
        TextError {
            source_name,
            line,
            message: message.into(),
        }
    }
}
