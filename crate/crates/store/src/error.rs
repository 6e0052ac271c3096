use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("table not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("table {} is corrupt at byte {offset}: {reason} ({recovered} records before it are intact)", .path.display())]
    Corrupt { path: PathBuf, offset: u64, recovered: usize, reason: String },
    #[error("table {} is locked by another writer", .0.display())]
    Locked(PathBuf),
    #[error("invalid table name {0:?}")]
    InvalidName(String),
    #[error("table metadata mismatch: {0}")]
    MetaMismatch(String),
    #[error("stored value does not decode: {0}")]
    BadValue(String),
    #[error(transparent)]
    Mask(#[from] cmd_mask::MaskError),
    #[error(transparent)]
    Core(#[from] cmd_core::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;
