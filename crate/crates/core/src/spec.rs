use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::error::{Error, Result};
use crate::key::Key;

/// Which keys of an axis a selection keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeySpec {
    All,
    Exact(Vec<Key>),
    /// Byte prefix, the `al*` form.
    Prefix(Key),
    /// Inclusive on both ends.
    Range(Key, Key),
}

impl KeySpec {
    pub fn exact<I, K>(keys: I) -> Self
    where
        I: IntoIterator<Item = K>,
        K: Into<Key>,
    {
        KeySpec::Exact(keys.into_iter().map(Into::into).collect())
    }

    pub fn prefix(p: impl Into<Key>) -> Self {
        KeySpec::Prefix(p.into())
    }

    pub fn range(start: impl Into<Key>, end: impl Into<Key>) -> Result<Self> {
        let spec = KeySpec::Range(start.into(), end.into());
        spec.validate(KeyEncoding::Raw)?;
        Ok(spec)
    }

    pub fn is_all(&self) -> bool {
        matches!(self, KeySpec::All)
    }

    pub fn validate(&self, enc: KeyEncoding) -> Result<()> {
        if let KeySpec::Range(start, end) = self {
            if enc.decode(start)? > enc.decode(end)? {
                return Err(Error::InvalidRange { start: start.clone(), end: end.clone() });
            }
        }
        if let KeySpec::Prefix(p) = self {
            enc.decode(p)?;
        }
        Ok(())
    }

    /// Indices into the sorted `keys` that this spec selects, ascending.
    pub fn select_indices(&self, keys: &[Key], enc: KeyEncoding) -> Result<Vec<usize>> {
        self.validate(enc)?;
        let lower = |k: &[u8]| keys.partition_point(|x| x.as_bytes() < k);
        let upper = |k: &[u8]| keys.partition_point(|x| x.as_bytes() <= k);
        Ok(match (self, enc) {
            (KeySpec::All, _) => (0..keys.len()).collect(),
            (KeySpec::Exact(list), _) => {
                let mut idx: Vec<usize> =
                    list.iter().filter_map(|k| keys.binary_search(k).ok()).collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            }
            (KeySpec::Prefix(p), KeyEncoding::Raw) => {
                let start = lower(p.as_bytes());
                let len = keys[start..].partition_point(|k| k.starts_with(p.as_bytes()));
                (start..start + len).collect()
            }
            (KeySpec::Range(a, b), KeyEncoding::Raw) => (lower(a.as_bytes())..upper(b.as_bytes())).collect(),
            (spec, KeyEncoding::Base64) => {
                let mut out = Vec::new();
                for (i, k) in keys.iter().enumerate() {
                    if spec.matches(k, enc)? {
                        out.push(i);
                    }
                }
                out
            }
        })
    }

    /// Single-key test. Keys that do not decode under `enc` never match a
    /// prefix or range.
    pub fn matches(&self, key: &Key, enc: KeyEncoding) -> Result<bool> {
        Ok(match self {
            KeySpec::All => true,
            KeySpec::Exact(list) => list.iter().any(|k| k == key),
            KeySpec::Prefix(p) => match enc.decode(key) {
                Ok(k) => k.starts_with(&enc.decode(p)?),
                Err(_) => false,
            },
            KeySpec::Range(a, b) => match enc.decode(key) {
                Ok(k) => enc.decode(a)? <= k && k <= enc.decode(b)?,
                Err(_) => false,
            },
        })
    }
}

/// How key bytes are interpreted for prefix and range comparisons.
///
/// Masked keys are carried as Base64 text, whose lexicographic order differs
/// from the order of the underlying ciphertext bytes. Order-dependent specs
/// on such axes must compare decoded bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KeyEncoding {
    #[default]
    Raw,
    Base64,
}

impl KeyEncoding {
    pub fn decode(self, key: &Key) -> Result<Vec<u8>> {
        match self {
            KeyEncoding::Raw => Ok(key.as_bytes().to_vec()),
            KeyEncoding::Base64 => STANDARD
                .decode(key.as_bytes())
                .map_err(|e| Error::InvalidSpec(format!("{key} is not Base64: {e}"))),
        }
    }
}
