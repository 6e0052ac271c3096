use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cmd_core::Key;

use crate::error::{MaskError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Deterministic: leaks equality.
    Det,
    /// Order-preserving: leaks order.
    Ope,
    /// Randomized: leaks length only.
    Rnd,
    /// Additively homomorphic.
    HomPlus,
    Clear,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Det => "DET",
            Scheme::Ope => "OPE",
            Scheme::Rnd => "RND",
            Scheme::HomPlus => "HOMPLUS",
            Scheme::Clear => "CLEAR",
        }
    }

    pub fn is_key_scheme(self) -> bool {
        matches!(self, Scheme::Det | Scheme::Ope | Scheme::Clear)
    }

    pub fn is_value_scheme(self) -> bool {
        matches!(self, Scheme::Rnd | Scheme::HomPlus | Scheme::Clear)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "DET" => Scheme::Det,
            "OPE" => Scheme::Ope,
            "RND" => Scheme::Rnd,
            "HOMPLUS" | "HOM+" => Scheme::HomPlus,
            "CLEAR" => Scheme::Clear,
            other => return Err(MaskError::Parse(format!("unknown scheme {other:?}"))),
        })
    }
}

/// Scheme tag plus raw ciphertext bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub scheme: Scheme,
    pub bytes: Vec<u8>,
}

impl Ciphertext {
    pub fn to_base64(&self) -> String {
        STANDARD.encode(&self.bytes)
    }

    /// Key form: Base64 text, except `CLEAR`, which is the plaintext itself.
    pub fn to_key(&self) -> Key {
        match self.scheme {
            Scheme::Clear => Key::from(self.bytes.as_slice()),
            _ => Key::from(self.to_base64()),
        }
    }

    pub fn from_key(scheme: Scheme, key: &Key) -> Result<Self> {
        let bytes = match scheme {
            Scheme::Clear => key.as_bytes().to_vec(),
            _ => STANDARD
                .decode(key.as_bytes())
                .map_err(|e| MaskError::DecryptFailure(format!("{key} is not Base64: {e}")))?,
        };
        Ok(Ciphertext { scheme, bytes })
    }
}

/// Scheme per array component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MaskPolicy {
    pub rows: Scheme,
    pub cols: Scheme,
    pub values: Scheme,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy { rows: Scheme::Det, cols: Scheme::Det, values: Scheme::Clear }
    }
}

impl MaskPolicy {
    pub fn new(rows: Scheme, cols: Scheme, values: Scheme) -> Result<Self> {
        let p = MaskPolicy { rows, cols, values };
        p.validate()?;
        Ok(p)
    }

    pub const CLEAR: MaskPolicy = MaskPolicy { rows: Scheme::Clear, cols: Scheme::Clear, values: Scheme::Clear };

    /// Keys must stay comparable byte strings; values take a value scheme.
    pub fn validate(&self) -> Result<()> {
        if !self.rows.is_key_scheme() || !self.cols.is_key_scheme() {
            return Err(MaskError::PolicyMismatch(format!("rows and cols take DET, OPE or CLEAR, got {}", self.header())));
        }
        if !self.values.is_value_scheme() {
            return Err(MaskError::PolicyMismatch(format!("values take RND, HOMPLUS or CLEAR, got {}", self.values)));
        }
        Ok(())
    }

    pub fn transposed(&self) -> Self {
        MaskPolicy { rows: self.cols, cols: self.rows, values: self.values }
    }

    /// `DET,OPE,RND` form used in masked-array file headers.
    pub fn header(&self) -> String {
        format!("{},{},{}", self.rows, self.cols, self.values)
    }

    pub fn from_header(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(',').collect();
        let [r, c, v] = parts.as_slice() else {
            return Err(MaskError::Parse(format!("policy header needs three schemes, got {s:?}")));
        };
        MaskPolicy::new(r.parse()?, c.parse()?, v.parse()?)
    }

    /// Policy file: `rows=`, `cols=` and `values=` lines. Blank lines and
    /// `#` comments are ignored.
    pub fn parse_file(text: &str) -> Result<Self> {
        let (mut rows, mut cols, mut values) = (None, None, None);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MaskError::Parse(format!("policy line {}: expected key=value", n + 1)))?;
            let slot = match k.trim() {
                "rows" => &mut rows,
                "cols" => &mut cols,
                "values" => &mut values,
                other => return Err(MaskError::Parse(format!("policy line {}: unknown component {other:?}", n + 1))),
            };
            if slot.replace(v.parse::<Scheme>()?).is_some() {
                return Err(MaskError::Parse(format!("policy line {}: {} given twice", n + 1, k.trim())));
            }
        }
        let missing = |name: &str| MaskError::Parse(format!("policy file lacks a {name}= line"));
        MaskPolicy::new(rows.ok_or_else(|| missing("rows"))?, cols.ok_or_else(|| missing("cols"))?, values.ok_or_else(|| missing("values"))?)
    }

    pub fn to_file(&self) -> String {
        format!("rows={}\ncols={}\nvalues={}\n", self.rows, self.cols, self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_file_round_trip() {
        let p = MaskPolicy::new(Scheme::Det, Scheme::Ope, Scheme::Rnd).unwrap();
        assert_eq!(MaskPolicy::parse_file(&p.to_file()).unwrap(), p);
        assert_eq!(MaskPolicy::from_header(&p.header()).unwrap(), p);
        assert_eq!(p.header(), "DET,OPE,RND");
        let commented = "# figure-4 style\nrows = DET\n\ncols=OPE\nvalues=HOMPLUS\n";
        assert_eq!(MaskPolicy::parse_file(commented).unwrap().values, Scheme::HomPlus);
    }

    #[test]
    fn invalid_policies() {
        assert!(MaskPolicy::new(Scheme::Rnd, Scheme::Det, Scheme::Clear).is_err());
        assert!(MaskPolicy::new(Scheme::Det, Scheme::HomPlus, Scheme::Clear).is_err());
        assert!(MaskPolicy::new(Scheme::Det, Scheme::Det, Scheme::Det).is_err());
        assert!(MaskPolicy::parse_file("rows=DET\ncols=DET\n").is_err());
        assert!(MaskPolicy::parse_file("rows=DET\nrows=DET\ncols=DET\nvalues=RND").is_err());
        assert!(MaskPolicy::parse_file("rows=XOR\ncols=DET\nvalues=RND").is_err());
        assert!(MaskPolicy::from_header("DET,DET").is_err());
    }
}
