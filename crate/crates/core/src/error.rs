use crate::key::Key;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate entry ({row}, {col}) mixes a numeric and a string value")]
    MixedTypeCollision { row: Key, col: Key },
    #[error("operation on ({row}, {col}) mixes numeric and string values")]
    TypeMismatch { row: Key, col: Key },
    #[error("range start {start} sorts after range end {end}")]
    InvalidRange { start: Key, end: Key },
    #[error("key spec is not valid for this key encoding: {0}")]
    InvalidSpec(String),
    #[error("empty row or column key")]
    EmptyKey,
    #[error("relabeling maps two keys onto {0}")]
    DuplicateKey(Key),
    #[error("value at ({row}, {col}) is not storable: {reason}")]
    InvalidValue { row: Key, col: Key, reason: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("record {record} has {got} cells, expected {expected}")]
    RaggedRow { record: usize, got: usize, expected: usize },
    #[error("row id {0} appears more than once")]
    DuplicateRowId(Key),
    #[error("delimiter {delimiter:?} occurs in column name {column}")]
    DelimiterClash { delimiter: char, column: Key },
    #[error("column key {0} has no delimiter")]
    MalformedColumn(Key),
    #[error("row {row} has more than one value for column {column}")]
    MultiValueCell { row: Key, column: Key },
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
