use alloc::string::String;

/// Errors raised by the core library.
///
/// The variants are grouped by how a caller is expected to react: fix the
/// configuration, fix the input data, or treat the run as numerically
/// unusable.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("observation {index} has zero likelihood under every pool")]
    DegenerateEvidence { index: usize },

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
