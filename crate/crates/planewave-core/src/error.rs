use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Evaluation at a singular point (zero distance, coincident points).
    #[error("singularity: {0}")]
    Singular(String),
    /// Inconsistent or degenerate configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A requested point or node is not part of the evaluated set.
    #[error("lookup error: {0}")]
    Lookup(String),
    /// A size guard rejected an allocation.
    #[error("resource guard: {0}")]
    Resource(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
