use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    #[error("measurement outcome has probability {0:e}, below the 1e-15 floor")]
    MeasurementImpossible(f64),

    #[error("protocol is meaningless near F = 1/D (F1 = {0} <= 1)")]
    ProtocolMeaningless(f64),

    #[error("no protocol exists: {0}")]
    Nonexistence(String),

    #[error("sampling infeasible: {0} consecutive rejections")]
    SamplingInfeasible(u64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
