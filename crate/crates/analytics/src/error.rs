use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("sequence {id} has {len} bases, fewer than k = {k}")]
    SequenceTooShort { id: String, len: usize, k: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("sequence {id} contains {base:?} at position {pos}; only A, C, G, T are allowed")]
    InvalidBase { id: String, base: char, pos: usize },
    #[error("duplicate sequence id {0}")]
    DuplicateId(String),
    #[error("FASTA line {line}: {msg}")]
    Fasta { line: usize, msg: String },
    #[error("no column starts with {0:?}")]
    EmptyProjection(String),
    #[error(transparent)]
    Core(#[from] cmd_core::Error),
    #[error(transparent)]
    Mask(#[from] cmd_mask::MaskError),
}

pub type Result<T, E = AnalyticsError> = std::result::Result<T, E>;
