use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("unsupported {kind} format version {found} (expected {expected})")]
    Version { kind: &'static str, found: String, expected: u32 },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] underlay_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// 1 for usage and configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Config(_) => 1,
            SimError::Core(underlay_core::Error::Config(_) | underlay_core::Error::MissingModel(_)) => 1,
            _ => 2,
        }
    }
}
