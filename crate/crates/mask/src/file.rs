//! Masked-array files: the triple text format preceded by two header lines,
//! `salt=<hex>` and `policy=<rows>,<cols>,<values>`.

use std::io::{BufRead, Write};

use cmd_core::{text, AssocArray, CollisionRule, Scalar};

use crate::error::{MaskError, Result};
use crate::keys::Salt;
use crate::masked::MaskedArray;
use crate::policy::MaskPolicy;

pub fn header_bytes(salt: Salt, policy: MaskPolicy) -> Vec<u8> {
    format!("salt={}\npolicy={}\n", salt.to_hex(), policy.header()).into_bytes()
}

pub fn to_bytes<T: Scalar>(m: &MaskedArray<T>) -> Vec<u8> {
    let mut out = header_bytes(m.salt, m.policy);
    out.extend_from_slice(&text::to_bytes(&m.payload));
    out
}

pub fn write_masked<T: Scalar, W: Write>(mut w: W, m: &MaskedArray<T>) -> Result<()> {
    w.write_all(&to_bytes(m))?;
    Ok(())
}

/// Whether the bytes start like a masked-array file.
pub fn is_masked(bytes: &[u8]) -> bool {
    bytes.starts_with(b"salt=")
}

pub fn read_masked<T: Scalar, R: BufRead>(mut r: R) -> Result<MaskedArray<T>> {
    let mut header = |name: &str| -> Result<String> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        line.trim_end()
            .strip_prefix(&format!("{name}="))
            .map(str::to_string)
            .ok_or_else(|| MaskError::Parse(format!("masked file lacks a {name}= header")))
    };
    let salt = Salt::from_hex(&header("salt")?)?;
    let policy = MaskPolicy::from_header(&header("policy")?)?;
    let payload = AssocArray::from_triples(text::read_triples(r, 3)?, CollisionRule::Sum)?;
    Ok(MaskedArray { payload, policy, salt })
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<MaskedArray<T>> {
    read_masked(bytes)
}

#[cfg(test)]
mod tests {
    use cmd_core::{Assoc, Triple};

    use super::*;
    use crate::policy::Scheme;

    #[test]
    fn header_layout_and_round_trip() {
        let payload = Assoc::from_triples([Triple::new("AAAA", "BBBB", 2.0)], CollisionRule::Sum).unwrap();
        let m = MaskedArray { payload, policy: MaskPolicy::new(Scheme::Det, Scheme::Ope, Scheme::Clear).unwrap(), salt: Salt([0xab; 16]) };
        let bytes = to_bytes(&m);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text, format!("salt={}\npolicy=DET,OPE,CLEAR\nAAAA\tBBBB\tn:2\n", "ab".repeat(16)));
        assert!(is_masked(&bytes));
        assert_eq!(from_bytes::<f64>(&bytes).unwrap(), m);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(from_bytes::<f64>(b"a\tb\tn:1\n").is_err());
        let no_policy = format!("salt={}\na\tb\tn:1\n", "00".repeat(16));
        assert!(from_bytes::<f64>(no_policy.as_bytes()).is_err());
    }
}
