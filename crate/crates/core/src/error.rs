//! Error taxonomy shared across the crate.
//!
//! Every fallible operation returns one of three categories: `Input` for
//! caller mistakes (bad files, invalid parameters, mismatched dimensions),
//! `Resource` for configured limits being exceeded, and `Internal` for
//! violated invariants that indicate a bug. The CLI maps these to exit codes
//! 2, 3 and 4 respectively.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Process exit code for the CLI: 2 input, 3 resource, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 2,
            Error::Resource(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Input(format!("io: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Input(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
