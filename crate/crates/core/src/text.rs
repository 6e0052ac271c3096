//! Line-oriented triple text format.
//!
//! One entry per line: `row TAB col TAB value`, where the value carries a
//! type tag (`n:` followed by the shortest round-trip decimal, or `s:`
//! followed by the string). Tab, newline and backslash inside keys and
//! strings are written as `\t`, `\n` and `\\`. Arrays serialize in
//! `(row, col)` order, which makes the encoding canonical.

use std::io::{BufRead, Write};

use crate::array::{AssocArray, CollisionRule};
use crate::error::{Error, Result};
use crate::key::Key;
use crate::scalar::Scalar;
use crate::value::{Triple, Value};

pub fn escape_into(out: &mut Vec<u8>, bytes: &[u8]) {
    for &b in bytes {
        match b {
            b'\\' => out.extend_from_slice(b"\\\\"),
            b'\t' => out.extend_from_slice(b"\\t"),
            b'\n' => out.extend_from_slice(b"\\n"),
            _ => out.push(b),
        }
    }
}

pub fn unescape(field: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(field.len());
    let mut it = field.iter();
    while let Some(&b) = it.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        match it.next() {
            Some(b'\\') => out.push(b'\\'),
            Some(b't') => out.push(b'\t'),
            Some(b'n') => out.push(b'\n'),
            Some(&other) => return Err(format!("unknown escape \\{}", other as char)),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

/// Encodes a value token (`n:47`, `s:cited`).
pub fn encode_value<T: Scalar>(out: &mut Vec<u8>, v: &Value<T>) {
    match v {
        Value::Num(x) => {
            out.extend_from_slice(b"n:");
            out.extend_from_slice(x.to_canonical().as_bytes());
        }
        Value::Str(s) => {
            out.extend_from_slice(b"s:");
            escape_into(out, s.as_bytes());
        }
    }
}

pub fn decode_value<T: Scalar>(token: &[u8]) -> Result<Value<T>, String> {
    match token {
        [b'n', b':', num @ ..] => {
            let s = std::str::from_utf8(num).map_err(|_| "numeric value is not UTF-8".to_string())?;
            let x: T = s.parse().map_err(|_| format!("bad number {s:?}"))?;
            if !x.is_storable() {
                return Err(format!("non-finite number {s:?}"));
            }
            Ok(Value::Num(x))
        }
        [b's', b':', rest @ ..] => Ok(Value::Str(Key::from(unescape(rest)?))),
        _ => Err("value lacks an n: or s: tag".into()),
    }
}

pub fn encode_triple<T: Scalar>(out: &mut Vec<u8>, row: &Key, col: &Key, val: &Value<T>) {
    escape_into(out, row.as_bytes());
    out.push(b'\t');
    escape_into(out, col.as_bytes());
    out.push(b'\t');
    encode_value(out, val);
    out.push(b'\n');
}

/// Parses one line (without its trailing newline).
pub fn parse_line<T: Scalar>(line: &[u8], lineno: usize) -> Result<Triple<T>> {
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let mut fields = line.split(|&b| b == b'\t');
    let (Some(r), Some(c), Some(v), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
        return Err(err("expected three tab-separated fields".into()));
    };
    let row = unescape(r).map_err(err)?;
    let col = unescape(c).map_err(err)?;
    if row.is_empty() || col.is_empty() {
        return Err(err("empty key".into()));
    }
    let val = decode_value(v).map_err(err)?;
    Ok(Triple { row: row.into(), col: col.into(), val })
}

pub fn to_bytes<T: Scalar>(a: &AssocArray<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(a.nnz() * 24);
    for (r, c, v) in a.iter() {
        encode_triple(&mut out, r, c, v);
    }
    out
}

pub fn write_array<T: Scalar, W: Write>(mut w: W, a: &AssocArray<T>) -> Result<()> {
    w.write_all(&to_bytes(a))?;
    Ok(())
}

/// Reads triples, numbering lines from `first_line`. Blank lines are skipped.
pub fn read_triples<T: Scalar, R: BufRead>(r: R, first_line: usize) -> Result<Vec<Triple<T>>> {
    let mut out = Vec::new();
    for (n, line) in r.split(b'\n').enumerate() {
        let mut line = line?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if line.is_empty() {
            continue;
        }
        out.push(parse_line(&line, first_line + n)?);
    }
    Ok(out)
}

pub fn read_array<T: Scalar, R: BufRead>(r: R) -> Result<AssocArray<T>> {
    AssocArray::from_triples(read_triples(r, 1)?, CollisionRule::Sum)
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<AssocArray<T>> {
    read_array(bytes)
}
