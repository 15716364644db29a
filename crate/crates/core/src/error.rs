//! Error type shared across the crate.

use std::fmt;
use std::io;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error for model/dataset/network operations and file I/O.
#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure while reading or writing an artifact.
    Io(io::Error),
    /// A binary file did not start with the expected magic bytes.
    BadMagic { expected: &'static str, found: [u8; 4] },
    /// A binary file ended before the named section was fully read.
    Truncated { section: &'static str },
    /// A header field was structurally invalid (bad enum byte, overflowing
    /// dimensions, inconsistent layer plan, trailing bytes, ...).
    Header(String),
    /// Two linked quantities disagree in size; the message carries both.
    Mismatch { what: &'static str, expected: usize, actual: usize },
    /// An argument violated a documented precondition.
    Invalid(String),
    /// Training produced a non-finite loss and was aborted.
    Diverged { epoch: usize, batch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {expected:?}, found {:?}",
                String::from_utf8_lossy(found)
            ),
            Error::Truncated { section } => {
                write!(f, "file truncated while reading section `{section}`")
            }
            Error::Header(msg) => write!(f, "invalid header: {msg}"),
            Error::Mismatch { what, expected, actual } => {
                write!(f, "{what}: expected {expected}, got {actual}")
            }
            Error::Invalid(msg) => write!(f, "invalid argument: {msg}"),
            Error::Diverged { epoch, batch } => write!(
                f,
                "training diverged (non-finite loss) at epoch {epoch}, batch {batch}"
            ),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
