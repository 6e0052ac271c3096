#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("key derivation failed: {0}")]
    Kdf(String),
    #[error("cannot encrypt an empty string")]
    EmptyPlaintext,
    #[error("decryption failed: {0}")]
    DecryptFailure(String),
    #[error("ciphertext failed authentication")]
    AuthFailure,
    #[error("order-preserving input is {len} bytes; at most 16 are supported")]
    InputTooLong { len: usize },
    #[error("policy does not fit the data: {0}")]
    PolicyMismatch(String),
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("array was masked under a different salt")]
    SaltMismatch,
    #[error("query not supported on masked keys: {0}")]
    UnsupportedQuery(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] cmd_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MaskError> = std::result::Result<T, E>;
