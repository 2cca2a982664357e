use alloc::string::String;

/// Errors shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),
    /// A size limit (such as the grid leaf cap) would be exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A point fell outside the gridded domain.
    #[error("point outside domain")]
    OutOfDomain,
    /// A cell id did not name a current leaf.
    #[error("unknown cell")]
    UnknownCell,
    /// A numerical routine (Cholesky, training) could not complete.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::Validation(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
