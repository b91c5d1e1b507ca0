//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by the model, training and inspection code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A caller violated an operation's precondition (bad shape, bad index,
    /// inconsistent configuration).
    InvalidArgument(String),
    /// A computation produced a non-finite value (training divergence).
    Numeric(String),
    /// An error surfaced from a user-supplied training callback.
    Callback(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Callback(msg) => write!(f, "callback failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

/// Shorthand for `Error::InvalidArgument` with a formatted message.
#[macro_export]
macro_rules! invalid_arg {
    ($($t:tt)*) => {
        $crate::Error::InvalidArgument(alloc::format!($($t)*))
    };
}
