//! Stateless order-preserving encryption of strings up to 16 bytes.
//!
//! Plaintexts are first ranked among all non-empty strings of at most 16
//! bytes in byte-lexicographic order, giving an integer domain of about
//! 2^128 points. The keyed map into the 2^192-point ciphertext space walks a
//! binary split of the domain: at each node the domain interval is halved
//! and the surplus of range points over domain points is shared between the
//! halves by a pseudorandom Binomial(surplus, 1/2) draw seeded from the
//! node's position. Each domain point ends at a leaf with an interval of
//! range points and takes one of them pseudorandomly. Ciphertexts are the
//! 24-byte big-endian encoding, so byte order equals plaintext order.

use std::sync::OnceLock;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use ruint::aliases::U256;

use crate::error::{MaskError, Result};

pub const MAX_LEN: usize = 16;
pub const CIPHERTEXT_LEN: usize = 24;

/// `tails()[d]` counts the strings of length `0..=d`.
fn tails() -> &'static [U256; MAX_LEN + 1] {
    static TAILS: OnceLock<[U256; MAX_LEN + 1]> = OnceLock::new();
    TAILS.get_or_init(|| {
        let mut t = [U256::ZERO; MAX_LEN + 1];
        let mut pow = U256::from(1u8);
        let mut sum = U256::ZERO;
        for slot in t.iter_mut() {
            sum += pow;
            *slot = sum;
            pow <<= 8;
        }
        t
    })
}

/// Number of non-empty strings of at most 16 bytes.
fn domain_size() -> U256 {
    tails()[MAX_LEN] - U256::from(1u8)
}

fn range_size() -> U256 {
    U256::from(1u8) << 192
}

/// Position of `m` in the sorted list of all non-empty strings of at most
/// 16 bytes.
pub fn rank(m: &[u8]) -> U256 {
    debug_assert!(!m.is_empty() && m.len() <= MAX_LEN);
    let t = tails();
    let mut r = U256::ZERO;
    for (i, &c) in m.iter().enumerate() {
        r += U256::from(1u8) + U256::from(c) * t[MAX_LEN - 1 - i];
    }
    r - U256::from(1u8)
}

pub fn unrank(rank: U256) -> Vec<u8> {
    let t = tails();
    let mut r = rank + U256::from(1u8);
    let mut out = Vec::with_capacity(MAX_LEN);
    let mut depth = MAX_LEN;
    while r > U256::ZERO && depth > 0 {
        r -= U256::from(1u8);
        let width = t[depth - 1];
        out.push((r / width).to::<u8>());
        r %= width;
        depth -= 1;
    }
    out
}

#[derive(Clone)]
pub struct OpeCipher {
    aes: Aes128,
}

struct Node {
    dlo: U256,
    dsize: U256,
    rlo: U256,
    rsize: U256,
    depth: u32,
}

impl OpeCipher {
    pub fn new(key: &[u8; 16]) -> Self {
        OpeCipher { aes: Aes128::new(GenericArray::from_slice(key)) }
    }

    pub fn encrypt(&self, m: &[u8]) -> Result<[u8; CIPHERTEXT_LEN]> {
        if m.is_empty() {
            return Err(MaskError::EmptyPlaintext);
        }
        if m.len() > MAX_LEN {
            return Err(MaskError::InputTooLong { len: m.len() });
        }
        let x = rank(m);
        let leaf = self.descend(|lo_end, _| x < lo_end);
        let c = leaf.rlo + self.leaf_offset(&leaf);
        let bytes = c.to_be_bytes::<32>();
        Ok(bytes[32 - CIPHERTEXT_LEN..].try_into().unwrap())
    }

    pub fn decrypt(&self, c: &[u8]) -> Result<Vec<u8>> {
        if c.len() != CIPHERTEXT_LEN {
            return Err(MaskError::DecryptFailure(format!("order-preserving ciphertext must be {CIPHERTEXT_LEN} bytes, got {}", c.len())));
        }
        let c = U256::from_be_slice(c);
        let leaf = self.descend(|_, range_end| c < range_end);
        if leaf.rlo + self.leaf_offset(&leaf) != c {
            return Err(MaskError::DecryptFailure("ciphertext is not in the image of this key".into()));
        }
        Ok(unrank(leaf.dlo))
    }

    /// Walks from the root to a leaf. `go_left(domain split, range split)`
    /// picks the branch.
    fn descend(&self, go_left: impl Fn(U256, U256) -> bool) -> Node {
        let mut n = Node { dlo: U256::ZERO, dsize: domain_size(), rlo: U256::ZERO, rsize: range_size(), depth: 0 };
        let two = U256::from(2u8);
        while n.dsize > U256::from(1u8) {
            let left = n.dsize / two;
            let surplus = n.rsize - n.dsize;
            let gap = binomial_half(surplus, self.prf(&n.dlo, n.depth, 0));
            let left_range = left + gap;
            if go_left(n.dlo + left, n.rlo + left_range) {
                n.dsize = left;
                n.rsize = left_range;
            } else {
                n.dlo += left;
                n.dsize -= left;
                n.rlo += left_range;
                n.rsize -= left_range;
            }
            n.depth += 1;
        }
        n
    }

    fn leaf_offset(&self, leaf: &Node) -> U256 {
        let r = self.prf(&leaf.dlo, leaf.depth, 1);
        let wide = U256::from(r) << 64 | U256::from(self.prf(&leaf.dlo, leaf.depth, 2) as u64);
        wide % leaf.rsize
    }

    /// Two-block CBC-MAC over the node identity.
    fn prf(&self, dlo: &U256, depth: u32, tag: u32) -> u128 {
        let limbs = dlo.as_limbs();
        let mut b1 = [0u8; 16];
        b1[..8].copy_from_slice(&limbs[0].to_le_bytes());
        b1[8..].copy_from_slice(&limbs[1].to_le_bytes());
        let mut b2 = [0u8; 16];
        b2[..8].copy_from_slice(&limbs[2].to_le_bytes());
        b2[8..12].copy_from_slice(&depth.to_le_bytes());
        b2[12..].copy_from_slice(&tag.to_le_bytes());

        let mut block = GenericArray::from(b1);
        self.aes.encrypt_block(&mut block);
        for (a, b) in block.iter_mut().zip(b2) {
            *a ^= b;
        }
        self.aes.encrypt_block(&mut block);
        u128::from_le_bytes(block.into())
    }
}

/// Binomial(n, 1/2) draw from 128 pseudorandom bits: exact bit counting for
/// small `n`, a clamped normal approximation otherwise.
fn binomial_half(n: U256, bits: u128) -> U256 {
    if n <= U256::from(64u8) {
        let k = n.to::<u32>();
        let mask = if k == 0 { 0 } else { u64::MAX >> (64 - k) };
        return U256::from(((bits as u64) & mask).count_ones());
    }
    let u1 = ((bits >> 75) as f64 + 1.0) / (1u64 << 53) as f64;
    let u2 = ((bits >> 11) as u64 & ((1 << 53) - 1)) as f64 / (1u64 << 53) as f64;
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    let sd = to_f64(n).sqrt() / 2.0;
    let offset = (z * sd).round();
    let mean: U256 = n >> 1usize;
    let delta = U256::from(offset.abs() as u128);
    if offset >= 0.0 {
        std::cmp::min(mean + delta, n)
    } else {
        mean.saturating_sub(delta)
    }
}

fn to_f64(x: U256) -> f64 {
    let bits = x.bit_len();
    if bits <= 64 {
        return x.to::<u64>() as f64;
    }
    let shift = bits - 64;
    (x >> shift).to::<u64>() as f64 * 2f64.powi(shift as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cipher() -> OpeCipher {
        OpeCipher::new(&[3u8; 16])
    }

    #[test]
    fn rank_is_order_preserving_and_invertible() {
        let mut words: Vec<Vec<u8>> = vec![
            vec![0],
            vec![0, 0],
            b"a".to_vec(),
            b"a\0".to_vec(),
            b"ab".to_vec(),
            b"b".to_vec(),
            vec![0xff; 16],
            vec![0xff],
            b"alice".to_vec(),
        ];
        words.sort();
        let ranks: Vec<U256> = words.iter().map(|w| rank(w)).collect();
        assert!(ranks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rank(&[0]), U256::ZERO);
        assert_eq!(rank(&[0xff; 16]), domain_size() - U256::from(1u8));
        for w in &words {
            assert_eq!(&unrank(rank(w)), w);
        }
    }

    #[test]
    fn order_and_round_trip() {
        let o = cipher();
        let a = o.encrypt(b"a").unwrap();
        let b = o.encrypt(b"b").unwrap();
        assert!(a < b);
        assert!(o.encrypt(b"a\0").unwrap() > a);
        assert_eq!(o.encrypt(b"a").unwrap(), a);
        for w in [&b"a"[..], b"zz", b"0123456789abcdef", &[0u8], &[0xff; 16]] {
            assert_eq!(o.decrypt(&o.encrypt(w).unwrap()).unwrap(), w);
        }
    }

    #[test]
    fn adjacent_plaintexts_stay_ordered() {
        let o = cipher();
        let mut prev = o.encrypt(&[0]).unwrap();
        for w in [&[0u8, 0][..], &[0, 0, 0], &[0, 1], &[1], &[1, 0]] {
            let c = o.encrypt(w).unwrap();
            assert!(prev < c);
            prev = c;
        }
    }

    #[test]
    fn length_limits() {
        let o = cipher();
        assert!(matches!(o.encrypt(&[1u8; 17]), Err(MaskError::InputTooLong { len: 17 })));
        assert!(matches!(o.encrypt(b""), Err(MaskError::EmptyPlaintext)));
        assert!(o.decrypt(&[0u8; 5]).is_err());
    }

    #[test]
    fn off_image_ciphertext_is_rejected() {
        let o = cipher();
        let mut c = o.encrypt(b"hello").unwrap();
        c[CIPHERTEXT_LEN - 1] ^= 1;
        assert!(o.decrypt(&c).is_err());
    }

    #[test]
    fn binomial_draw_stays_in_bounds() {
        for n in [0u64, 1, 5, 64, 65, 1000, u64::MAX] {
            for bits in [0u128, u128::MAX, 0x1234_5678_9abc_def0_1122_3344_5566_7788] {
                let g = binomial_half(U256::from(n), bits);
                assert!(g <= U256::from(n));
            }
        }
        let huge = U256::from(1u8) << 190;
        assert!(binomial_half(huge, u128::MAX) <= huge);
    }
}
