use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("input too short: {got} samples or frames, at least {min} required")]
    TooShort { got: usize, min: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rating {0} outside 1..=4")]
    RatingOutOfRange(i64),
    #[error("correlation undefined: {0}")]
    Undefined(&'static str),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("pair {0} has no matching prediction")]
    MissingPrediction(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
