//! Masking whole arrays and computing on the masked form.
//!
//! Masking replaces every row key, column key and value by its ciphertext
//! under the policy's scheme for that component and re-sorts the array by
//! the new keys. Because DET and OPE are injective, this only permutes rows
//! and columns; sparse algebra is invariant under such permutations, so
//! products, sums, thresholds and exact selections computed on the masked
//! array unmask to the plaintext results.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cmd_core::{text, AssocArray, CollisionRule, CombineOp, Key, KeyEncoding, KeySpec, Scalar, Triple, Value};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{MaskError, Result};
use crate::hom::PublicKey;
use crate::keys::{MaskKeySet, Salt};
use crate::ope;
use crate::policy::{Ciphertext, MaskPolicy, Scheme};

/// A masked array together with what is needed to interpret it: the policy
/// per component and the salt its keys were derived under.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedArray<T: Scalar = f64> {
    pub payload: AssocArray<T>,
    pub policy: MaskPolicy,
    pub salt: Salt,
}

/// Masks one string for use as a query key. Produces exactly the key that
/// [`mask_array`] stores for the same plaintext.
pub fn str_mask(word: &[u8], keys: &MaskKeySet, scheme: Scheme) -> Result<Ciphertext> {
    if word.is_empty() {
        return Err(MaskError::EmptyPlaintext);
    }
    let bytes = match scheme {
        Scheme::Det => keys.det().encrypt(word)?,
        Scheme::Ope => keys.ope().encrypt(word)?.to_vec(),
        Scheme::Clear => word.to_vec(),
        other => return Err(MaskError::SchemeMismatch(format!("{other} cannot mask keys"))),
    };
    Ok(Ciphertext { scheme, bytes })
}

pub fn mask_key(key: &Key, keys: &MaskKeySet, scheme: Scheme) -> Result<Key> {
    match scheme {
        Scheme::Clear => Ok(key.clone()),
        _ => Ok(str_mask(key.as_bytes(), keys, scheme)?.to_key()),
    }
}

pub fn unmask_key(key: &Key, keys: &MaskKeySet, scheme: Scheme) -> Result<Key> {
    let c = Ciphertext::from_key(scheme, key)?;
    Ok(match scheme {
        Scheme::Clear => key.clone(),
        Scheme::Det => Key::from(keys.det().decrypt(&c.bytes)?),
        Scheme::Ope => Key::from(keys.ope().decrypt(&c.bytes)?),
        other => return Err(MaskError::SchemeMismatch(format!("{other} is not a key scheme"))),
    })
}

fn mask_keys(list: &[Key], keys: &MaskKeySet, scheme: Scheme) -> Result<Vec<Key>> {
    if scheme == Scheme::Clear {
        return Ok(list.to_vec());
    }
    list.par_iter().map(|k| mask_key(k, keys, scheme)).collect()
}

fn unmask_keys(list: &[Key], keys: &MaskKeySet, scheme: Scheme) -> Result<Vec<Key>> {
    if scheme == Scheme::Clear {
        return Ok(list.to_vec());
    }
    list.par_iter().map(|k| unmask_key(k, keys, scheme)).collect()
}

fn mask_value<T: Scalar>(v: &Value<T>, keys: &MaskKeySet, scheme: Scheme) -> Result<Value<T>> {
    match scheme {
        Scheme::Clear => Ok(v.clone()),
        Scheme::Rnd => {
            let mut token = Vec::new();
            text::encode_value(&mut token, v);
            Ok(Value::Str(Key::from(STANDARD.encode(keys.rnd().encrypt(&token)))))
        }
        Scheme::HomPlus => {
            let n = hom_plaintext(v)?;
            let pk = &keys.hom().public;
            Ok(Value::Str(Key::from(STANDARD.encode(pk.to_bytes(&pk.encrypt_u64(n))))))
        }
        other => Err(MaskError::SchemeMismatch(format!("{other} is not a value scheme"))),
    }
}

fn hom_plaintext<T: Scalar>(v: &Value<T>) -> Result<u64> {
    let bad = || MaskError::PolicyMismatch(format!("HOMPLUS values must be integers in [0, 2^64), got {v:?}"));
    let x = v.as_num().ok_or_else(bad)?;
    let n = x.to_u64().ok_or_else(bad)?;
    if T::from_u64(n) != Some(x) {
        return Err(bad());
    }
    Ok(n)
}

fn unmask_value<T: Scalar>(v: &Value<T>, keys: &MaskKeySet, scheme: Scheme) -> Result<Value<T>> {
    let cipher_bytes = |v: &Value<T>| -> Result<Vec<u8>> {
        match v {
            Value::Str(s) => STANDARD
                .decode(s.as_bytes())
                .map_err(|e| MaskError::DecryptFailure(format!("masked value is not Base64: {e}"))),
            Value::Num(_) => Err(MaskError::SchemeMismatch(format!("{scheme} value stored as a number"))),
        }
    };
    match scheme {
        Scheme::Clear => Ok(v.clone()),
        Scheme::Rnd => {
            let token = keys.rnd().decrypt(&cipher_bytes(v)?).map_err(|e| match e {
                MaskError::AuthFailure => MaskError::DecryptFailure("value failed authentication".into()),
                other => other,
            })?;
            text::decode_value(&token).map_err(MaskError::DecryptFailure)
        }
        Scheme::HomPlus => {
            let kp = keys.hom();
            let c = kp.public.from_bytes(&cipher_bytes(v)?)?;
            let m: BigUint = kp.decrypt(&c)?;
            let x = m.to_f64().and_then(T::from_f64).ok_or_else(|| MaskError::DecryptFailure("sum out of range".into()))?;
            Ok(Value::Num(x))
        }
        other => Err(MaskError::SchemeMismatch(format!("{other} is not a value scheme"))),
    }
}

pub fn mask_array<T: Scalar>(a: &AssocArray<T>, policy: MaskPolicy, keys: &MaskKeySet) -> Result<MaskedArray<T>> {
    policy.validate()?;
    for (axis, scheme, list) in [("row", policy.rows, a.rows()), ("column", policy.cols, a.cols())] {
        if scheme == Scheme::Ope {
            if let Some(k) = list.iter().find(|k| k.len() > ope::MAX_LEN) {
                return Err(MaskError::PolicyMismatch(format!("{axis} key {k} is longer than {} bytes; OPE needs short keys", ope::MAX_LEN)));
            }
        }
    }
    let rows = mask_keys(a.rows(), keys, policy.rows)?;
    let cols = mask_keys(a.cols(), keys, policy.cols)?;
    let relabeled = a.relabel(rows, cols)?;
    let payload = match policy.values {
        Scheme::Clear => relabeled,
        scheme => relabeled.try_map_values(|v| mask_value(v, keys, scheme))?,
    };
    Ok(MaskedArray { payload, policy, salt: keys.salt() })
}

pub fn unmask_array<T: Scalar>(m: &MaskedArray<T>, keys: &MaskKeySet) -> Result<AssocArray<T>> {
    if m.salt != keys.salt() {
        return Err(MaskError::SaltMismatch);
    }
    let rows = unmask_keys(m.payload.rows(), keys, m.policy.rows)?;
    let cols = unmask_keys(m.payload.cols(), keys, m.policy.cols)?;
    let values = match m.policy.values {
        Scheme::Clear => m.payload.clone(),
        scheme => m.payload.try_map_values(|v| unmask_value(v, keys, scheme))?,
    };
    // Decryption under a wrong key can map distinct ciphertexts together.
    values.relabel(rows, cols).map_err(|e| MaskError::DecryptFailure(e.to_string()))
}

/// Translates a plaintext selection into one over keys masked with `scheme`.
///
/// DET keys support only exact matches. OPE keys also support ranges and
/// prefixes (a prefix becomes the range from the prefix to the largest
/// 16-byte string extending it).
pub fn mask_spec(spec: &KeySpec, keys: &MaskKeySet, scheme: Scheme) -> Result<KeySpec> {
    let unsupported = |what: &str| Err(MaskError::UnsupportedQuery(format!("{what} selection on {scheme} keys")));
    Ok(match (spec, scheme) {
        (_, Scheme::Clear) | (KeySpec::All, _) => spec.clone(),
        (KeySpec::Exact(list), _) => KeySpec::Exact(list.iter().map(|k| mask_key(k, keys, scheme)).collect::<Result<_>>()?),
        (KeySpec::Range(a, b), Scheme::Ope) => KeySpec::Range(mask_key(a, keys, scheme)?, mask_key(b, keys, scheme)?),
        (KeySpec::Prefix(p), Scheme::Ope) => {
            if p.len() > ope::MAX_LEN {
                return unsupported("over-long prefix");
            }
            let mut hi = p.as_bytes().to_vec();
            hi.resize(ope::MAX_LEN, 0xff);
            KeySpec::Range(mask_key(p, keys, scheme)?, mask_key(&Key::from(hi), keys, scheme)?)
        }
        (KeySpec::Range(..), _) => return unsupported("range"),
        (KeySpec::Prefix(_), _) => return unsupported("prefix"),
    })
}

/// Key encoding that order-dependent selections on an axis must use.
pub fn axis_encoding(scheme: Scheme) -> KeyEncoding {
    match scheme {
        Scheme::Ope => KeyEncoding::Base64,
        _ => KeyEncoding::Raw,
    }
}

impl<T: Scalar> MaskedArray<T> {
    pub fn nnz(&self) -> usize {
        self.payload.nnz()
    }

    fn same_keyspace(&self, other: &Self) -> Result<()> {
        if self.salt != other.salt {
            return Err(MaskError::SaltMismatch);
        }
        Ok(())
    }

    fn clear_values(&self, op: &str) -> Result<()> {
        if self.policy.values != Scheme::Clear {
            return Err(MaskError::PolicyMismatch(format!("{op} needs CLEAR values, array has {}", self.policy.values)));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        MaskedArray { payload: self.payload.transpose(), policy: self.policy.transposed(), salt: self.salt }
    }

    /// Product on masked keys. The contraction axis must be masked the same
    /// way on both sides.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.same_keyspace(other)?;
        self.clear_values("multiply")?;
        other.clear_values("multiply")?;
        if self.policy.cols != other.policy.rows {
            return Err(MaskError::SchemeMismatch(format!(
                "inner dimension masked with {} on the left and {} on the right",
                self.policy.cols, other.policy.rows
            )));
        }
        let policy = MaskPolicy { rows: self.policy.rows, cols: other.policy.cols, values: Scheme::Clear };
        Ok(MaskedArray { payload: self.payload.multiply(&other.payload), policy, salt: self.salt })
    }

    pub fn combine(&self, other: &Self, op: CombineOp) -> Result<Self> {
        self.same_keyspace(other)?;
        if self.policy != other.policy {
            return Err(MaskError::SchemeMismatch(format!("policies {} and {} differ", self.policy.header(), other.policy.header())));
        }
        self.clear_values("combine")?;
        Ok(MaskedArray { payload: self.payload.combine(&other.payload, op)?, policy: self.policy, salt: self.salt })
    }

    pub fn threshold(&self, cut: T) -> Result<Self> {
        self.clear_values("threshold")?;
        Ok(MaskedArray { payload: self.payload.threshold(cut)?, policy: self.policy, salt: self.salt })
    }

    /// Selection with already-masked specs (see [`mask_spec`]).
    pub fn select(&self, rows: &KeySpec, cols: &KeySpec) -> Result<Self> {
        for (spec, scheme) in [(rows, self.policy.rows), (cols, self.policy.cols)] {
            if scheme == Scheme::Det && matches!(spec, KeySpec::Prefix(_) | KeySpec::Range(..)) {
                return Err(MaskError::UnsupportedQuery("prefix or range selection on DET keys".into()));
            }
        }
        let payload = self.payload.select_encoded(rows, cols, axis_encoding(self.policy.rows), axis_encoding(self.policy.cols))?;
        Ok(MaskedArray { payload, policy: self.policy, salt: self.salt })
    }

    /// Element-wise sum of HOMPLUS-valued arrays, computed on ciphertexts.
    pub fn hom_add(&self, other: &Self, pk: &PublicKey) -> Result<Self> {
        self.same_keyspace(other)?;
        if self.policy != other.policy || self.policy.values != Scheme::HomPlus {
            return Err(MaskError::SchemeMismatch("hom_add needs two HOMPLUS arrays under one policy".into()));
        }
        let decode = |v: &Value<T>| -> Result<crate::hom::HomCiphertext> {
            match v {
                Value::Str(s) => pk.from_bytes(&STANDARD.decode(s.as_bytes()).map_err(|e| MaskError::DecryptFailure(e.to_string()))?),
                Value::Num(_) => Err(MaskError::SchemeMismatch("HOMPLUS value stored as a number".into())),
            }
        };
        let mut merged: BTreeMap<(Key, Key), Value<T>> =
            self.payload.iter().map(|(r, c, v)| ((r.clone(), c.clone()), v.clone())).collect();
        for (r, c, v) in other.payload.iter() {
            let slot = (r.clone(), c.clone());
            let sum = match merged.get(&slot) {
                Some(existing) => {
                    let s = pk.add(&decode(existing)?, &decode(v)?);
                    Value::Str(Key::from(STANDARD.encode(pk.to_bytes(&s))))
                }
                None => v.clone(),
            };
            merged.insert(slot, sum);
        }
        let payload = AssocArray::from_triples(
            merged.into_iter().map(|((row, col), val)| Triple { row, col, val }),
            CollisionRule::LastWins,
        )?;
        Ok(MaskedArray { payload, policy: self.policy, salt: self.salt })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use cmd_core::Assoc;

    use super::*;

    fn keys() -> &'static MaskKeySet {
        static K: OnceLock<MaskKeySet> = OnceLock::new();
        K.get_or_init(|| MaskKeySet::derive(b"password", Salt([5; 16])).unwrap())
    }

    fn citations() -> Assoc {
        Assoc::from_triples(
            [("alice", "bob"), ("alice", "carl"), ("bob", "alice"), ("carl", "alice"), ("carl", "bob")]
                .into_iter()
                .map(|(r, c)| Triple::new(r, c, 1.0)),
            CollisionRule::Sum,
        )
        .unwrap()
    }

    fn policy(r: Scheme, c: Scheme, v: Scheme) -> MaskPolicy {
        MaskPolicy::new(r, c, v).unwrap()
    }

    #[test]
    fn clear_policy_is_identity() {
        let a = citations();
        assert_eq!(mask_array(&a, MaskPolicy::CLEAR, keys()).unwrap().payload, a);
    }

    #[test]
    fn det_rows_keep_count_and_permute() {
        let a = citations();
        let m = mask_array(&a, policy(Scheme::Det, Scheme::Clear, Scheme::Clear), keys()).unwrap();
        assert_eq!(m.payload.nrows(), a.nrows());
        assert_eq!(m.nnz(), a.nnz());
        m.payload.check_invariants().unwrap();
        for (row, masked) in a.rows().iter().zip(a.rows().iter().map(|r| mask_key(r, keys(), Scheme::Det).unwrap())) {
            let n_plain = a.select(&KeySpec::exact([row.clone()]), &KeySpec::All).unwrap().nnz();
            let n_mask = m.payload.select(&KeySpec::exact([masked]), &KeySpec::All).unwrap().nnz();
            assert_eq!(n_plain, n_mask);
        }
        // Short keys become one Base64-encoded block.
        assert!(m.payload.rows().iter().all(|k| k.len() == 24));
    }

    #[test]
    fn ope_cols_keep_relative_order() {
        let a = citations();
        let m = mask_array(&a, policy(Scheme::Clear, Scheme::Ope, Scheme::Clear), keys()).unwrap();
        let decoded: Vec<Vec<u8>> = a.cols().iter().map(|c| keys().ope().encrypt(c.as_bytes()).unwrap().to_vec()).collect();
        assert!(decoded.windows(2).all(|w| w[0] < w[1]));
        let mut masked_sorted: Vec<Vec<u8>> = m.payload.cols().iter().map(|c| STANDARD.decode(c.as_bytes()).unwrap()).collect();
        masked_sorted.sort();
        assert_eq!(masked_sorted, decoded);
    }

    #[test]
    fn round_trips_for_every_key_policy() {
        let mut a = citations();
        a = a.combine(&Assoc::from_triples([Triple::new("dave", "erin", 2.5)], CollisionRule::Sum).unwrap(), CombineOp::Add).unwrap();
        let key_schemes = [Scheme::Det, Scheme::Ope, Scheme::Clear];
        for r in key_schemes {
            for c in key_schemes {
                for v in [Scheme::Rnd, Scheme::Clear] {
                    let p = policy(r, c, v);
                    let m = mask_array(&a, p, keys()).unwrap();
                    m.payload.check_invariants().unwrap();
                    assert_eq!(unmask_array(&m, keys()).unwrap(), a, "{}", p.header());
                }
            }
        }
    }

    #[test]
    fn rnd_values_hide_equal_plaintexts() {
        let a = citations();
        let m = mask_array(&a, policy(Scheme::Clear, Scheme::Clear, Scheme::Rnd), keys()).unwrap();
        let distinct: std::collections::HashSet<_> = m.payload.values().iter().map(|v| format!("{v:?}")).collect();
        assert_eq!(distinct.len(), a.nnz());
    }

    #[test]
    fn string_values_survive_rnd() {
        let a = Assoc::from_triples([Triple::new("alice", "bob", "cited")], CollisionRule::Sum).unwrap();
        let m = mask_array(&a, policy(Scheme::Det, Scheme::Det, Scheme::Rnd), keys()).unwrap();
        assert_eq!(unmask_array(&m, keys()).unwrap(), a);
    }

    #[test]
    fn wrong_password_fails() {
        let a = citations();
        let m = mask_array(&a, MaskPolicy::default(), keys()).unwrap();
        let other = MaskKeySet::derive(b"hunter2", keys().salt()).unwrap();
        assert!(matches!(unmask_array(&m, &other), Err(MaskError::DecryptFailure(_))));
        let other_salt = MaskKeySet::derive(b"password", Salt([6; 16])).unwrap();
        assert!(matches!(unmask_array(&m, &other_salt), Err(MaskError::SaltMismatch)));
    }

    #[test]
    fn str_mask_matches_stored_keys() {
        let a = citations();
        let m = mask_array(&a, MaskPolicy::default(), keys()).unwrap();
        let bob = str_mask(b"bob", keys(), Scheme::Det).unwrap().to_key();
        assert!(m.payload.cols().contains(&bob));
        assert_eq!(bob, str_mask(b"bob", keys(), Scheme::Det).unwrap().to_key());
        assert!(str_mask(b"", keys(), Scheme::Det).is_err());
        assert!(str_mask(b"x", keys(), Scheme::Rnd).is_err());
    }

    #[test]
    fn masked_gram_product_unmasks_to_plain() {
        let a = citations();
        let m = mask_array(&a, MaskPolicy::default(), keys()).unwrap();
        let x = m.multiply(&m.transpose()).unwrap();
        assert_eq!(unmask_array(&x, keys()).unwrap(), a.multiply(&a.transpose()));
    }

    #[test]
    fn masked_compute_rejects_incompatible_inputs() {
        let a = citations();
        let rnd = mask_array(&a, policy(Scheme::Det, Scheme::Det, Scheme::Rnd), keys()).unwrap();
        assert!(matches!(rnd.multiply(&rnd.transpose()), Err(MaskError::PolicyMismatch(_))));
        assert!(rnd.threshold(0.0).is_err());
        let det = mask_array(&a, MaskPolicy::default(), keys()).unwrap();
        let ope = mask_array(&a, policy(Scheme::Ope, Scheme::Ope, Scheme::Clear), keys()).unwrap();
        assert!(matches!(det.multiply(&ope), Err(MaskError::SchemeMismatch(_))));
        assert!(det.select(&KeySpec::prefix("x"), &KeySpec::All).is_err());
    }

    #[test]
    fn ope_range_and_prefix_select() {
        let a = citations();
        let p = policy(Scheme::Ope, Scheme::Clear, Scheme::Clear);
        let m = mask_array(&a, p, keys()).unwrap();
        for spec in [KeySpec::range("alice", "bob").unwrap(), KeySpec::prefix("ca"), KeySpec::range("b", "z").unwrap()] {
            let masked_spec = mask_spec(&spec, keys(), Scheme::Ope).unwrap();
            let got = unmask_array(&m.select(&masked_spec, &KeySpec::All).unwrap(), keys()).unwrap();
            assert_eq!(got, a.select(&spec, &KeySpec::All).unwrap(), "{spec:?}");
        }
        assert!(mask_spec(&KeySpec::prefix("a"), keys(), Scheme::Det).is_err());
    }

    #[test]
    fn ope_rejects_long_keys() {
        let a = Assoc::from_triples([Triple::new("a-very-long-row-key-here", "c", 1.0)], CollisionRule::Sum).unwrap();
        assert!(matches!(mask_array(&a, policy(Scheme::Ope, Scheme::Det, Scheme::Clear), keys()), Err(MaskError::PolicyMismatch(_))));
        assert!(mask_array(&a, MaskPolicy::default(), keys()).is_ok());
    }

    #[test]
    fn homomorphic_values_sum_under_mask() {
        let a = Assoc::from_triples([Triple::new("r", "c", 2.0), Triple::new("r", "d", 7.0)], CollisionRule::Sum).unwrap();
        let b = Assoc::from_triples([Triple::new("r", "c", 3.0), Triple::new("s", "c", 1.0)], CollisionRule::Sum).unwrap();
        let p = policy(Scheme::Det, Scheme::Det, Scheme::HomPlus);
        let (ma, mb) = (mask_array(&a, p, keys()).unwrap(), mask_array(&b, p, keys()).unwrap());
        let sum = ma.hom_add(&mb, &keys().hom().public).unwrap();
        assert_eq!(unmask_array(&sum, keys()).unwrap(), a.combine(&b, CombineOp::Add).unwrap());
        assert!(ma.multiply(&ma.transpose()).is_err());

        let frac = Assoc::from_triples([Triple::new("r", "c", 2.5)], CollisionRule::Sum).unwrap();
        assert!(matches!(mask_array(&frac, p, keys()), Err(MaskError::PolicyMismatch(_))));
        let neg = Assoc::from_triples([Triple::new("r", "c", -1.0)], CollisionRule::Sum).unwrap();
        assert!(mask_array(&neg, p, keys()).is_err());
    }
}
