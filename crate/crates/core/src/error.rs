use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("primary link {0} is not active")]
    InactiveLink(usize),
    #[error("no trained model supplied for policy {0}")]
    MissingModel(&'static str),
    #[error("training aborted after {0} consecutive rejected steps")]
    TrainingAborted(usize),
}
