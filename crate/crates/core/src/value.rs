use std::fmt;

use crate::key::Key;
use crate::scalar::Scalar;

/// Entry value: a number or a non-empty byte string.
#[derive(Clone, PartialEq)]
pub enum Value<T = f64> {
    Num(T),
    Str(Key),
}

impl<T: Scalar> Value<T> {
    pub fn str(s: impl AsRef<[u8]>) -> Self {
        Value::Str(Key::new(s))
    }

    /// Zero numbers and empty strings mean "no entry".
    pub fn is_absent(&self) -> bool {
        match self {
            Value::Num(x) => x.is_zero(),
            Value::Str(s) => s.is_empty(),
        }
    }

    pub fn as_num(&self) -> Option<T> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Str(_) => None,
        }
    }

    /// Numeric view under presence semantics: strings count as one.
    #[inline]
    pub fn coerce(&self) -> T {
        match self {
            Value::Num(x) => *x,
            Value::Str(_) => T::one(),
        }
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        match self {
            Value::Num(x) if !x.is_storable() => Err(format!("non-finite number {x}")),
            _ => Ok(()),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Value<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Value<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

impl<T: Scalar> From<T> for Value<T> {
    fn from(x: T) -> Self {
        Value::Num(x)
    }
}

impl<T: Scalar> From<&str> for Value<T> {
    fn from(s: &str) -> Self {
        Value::str(s)
    }
}

/// A `(row, col, value)` record.
#[derive(Clone, PartialEq, Debug)]
pub struct Triple<T = f64> {
    pub row: Key,
    pub col: Key,
    pub val: Value<T>,
}

impl<T: Scalar> Triple<T> {
    pub fn new(row: impl Into<Key>, col: impl Into<Key>, val: impl Into<Value<T>>) -> Self {
        Triple { row: row.into(), col: col.into(), val: val.into() }
    }
}
