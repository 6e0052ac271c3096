//! Additively homomorphic public-key encryption (Paillier, `g = n + 1`).
//!
//! Key pairs are generated deterministically from a 32-byte seed so that a
//! password reproduces them. Encryption uses the short-exponent randomizer
//! `h^x mod n²` with `h = y^n` fixed in the public key and `x` a fresh 256-bit
//! value; a fixed-base window table makes that about 64 modular products.
//! Decryption works modulo `p²` and `q²` and recombines.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{MaskError, Result};

pub const MODULUS_BITS: usize = 2048;
/// Serialized ciphertext length: elements of `Z/n²`.
pub const CIPHERTEXT_LEN: usize = MODULUS_BITS / 4;
const RANDOMIZER_BITS: usize = 256;
const WINDOW: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomCiphertext(pub BigUint);

pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    /// `table[w][d] = h^(d · 16^w) mod n²`.
    table: Vec<Vec<BigUint>>,
}

pub struct PrivateKey {
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    hp: BigUint,
    hq: BigUint,
    q_inv_p: BigUint,
}

pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let mut rng = ChaCha20Rng::from_seed(seed);
        let half = MODULUS_BITS / 2;
        let p = random_prime(&mut rng, half);
        let mut q = random_prime(&mut rng, half);
        while q == p {
            q = random_prime(&mut rng, half);
        }
        let n = &p * &q;
        let n_squared = &n * &n;

        let y = loop {
            let y = random_below(&mut rng, &n);
            if y > BigUint::one() && y.gcd(&n).is_one() {
                break y;
            }
        };
        let h = y.modpow(&n, &n_squared);
        let table = window_table(&h, &n_squared);

        let g = &n + 1u32;
        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let hp = inverse(&l_function(&g.modpow(&(&p - 1u32), &p_squared), &p), &p);
        let hq = inverse(&l_function(&g.modpow(&(&q - 1u32), &q_squared), &q), &q);
        let q_inv_p = inverse(&q, &p);
        KeyPair {
            public: PublicKey { n, n_squared, table },
            private: PrivateKey { p, q, p_squared, q_squared, hp, hq, q_inv_p },
        }
    }

    pub fn decrypt(&self, c: &HomCiphertext) -> Result<BigUint> {
        self.private.decrypt(c, &self.public)
    }
}

impl PublicKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn encrypt(&self, m: &BigUint) -> Result<HomCiphertext> {
        if m >= &self.n {
            return Err(MaskError::PolicyMismatch("plaintext exceeds the homomorphic modulus".into()));
        }
        let mut x = [0u8; RANDOMIZER_BITS / 8];
        rand::thread_rng().fill_bytes(&mut x);
        let mut r = BigUint::one();
        for (w, digit) in nibbles(&x).enumerate() {
            if digit != 0 {
                r = (r * &self.table[w][digit]) % &self.n_squared;
            }
        }
        let gm = (m * &self.n + 1u32) % &self.n_squared;
        Ok(HomCiphertext(gm * r % &self.n_squared))
    }

    pub fn encrypt_u64(&self, m: u64) -> HomCiphertext {
        self.encrypt(&BigUint::from(m)).expect("u64 is below a 2048-bit modulus")
    }

    /// Ciphertext of the plaintext sum.
    pub fn add(&self, a: &HomCiphertext, b: &HomCiphertext) -> HomCiphertext {
        HomCiphertext(&a.0 * &b.0 % &self.n_squared)
    }

    pub fn to_bytes(&self, c: &HomCiphertext) -> Vec<u8> {
        let raw = c.0.to_bytes_be();
        let mut out = vec![0u8; CIPHERTEXT_LEN - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    pub fn from_bytes(&self, bytes: &[u8]) -> Result<HomCiphertext> {
        let c = BigUint::from_bytes_be(bytes);
        if bytes.len() != CIPHERTEXT_LEN || c >= self.n_squared || c.is_zero() {
            return Err(MaskError::DecryptFailure("not a homomorphic ciphertext for this key".into()));
        }
        Ok(HomCiphertext(c))
    }
}

impl PrivateKey {
    pub fn decrypt(&self, c: &HomCiphertext, pk: &PublicKey) -> Result<BigUint> {
        if c.0 >= pk.n_squared || !c.0.gcd(&pk.n).is_one() {
            return Err(MaskError::DecryptFailure("ciphertext outside the key's group".into()));
        }
        let mp = l_function(&c.0.modpow(&(&self.p - 1u32), &self.p_squared), &self.p) * &self.hp % &self.p;
        let mq = l_function(&c.0.modpow(&(&self.q - 1u32), &self.q_squared), &self.q) * &self.hq % &self.q;
        // m = mq + q · ((mp - mq) · q⁻¹ mod p)
        let diff = (&mp + &self.p - &mq % &self.p) % &self.p;
        Ok(mq + &self.q * (diff * &self.q_inv_p % &self.p))
    }
}

fn l_function(x: &BigUint, d: &BigUint) -> BigUint {
    (x - 1u32) / d
}

fn inverse(a: &BigUint, m: &BigUint) -> BigUint {
    a.modinv(m).expect("key material is coprime by construction")
}

fn nibbles(bytes: &[u8]) -> impl Iterator<Item = usize> + '_ {
    bytes.iter().flat_map(|b| [(b & 0x0f) as usize, (b >> 4) as usize])
}

fn window_table(h: &BigUint, modulus: &BigUint) -> Vec<Vec<BigUint>> {
    let windows = RANDOMIZER_BITS / WINDOW;
    let mut table = Vec::with_capacity(windows);
    let mut base = h.clone();
    for _ in 0..windows {
        let mut row = Vec::with_capacity(1 << WINDOW);
        row.push(BigUint::one());
        for d in 1..(1 << WINDOW) {
            let next = &row[d - 1] * &base % modulus;
            row.push(next);
        }
        base = &row[(1 << WINDOW) - 1] * &base % modulus;
        table.push(row);
    }
    table
}

fn random_bits(rng: &mut impl RngCore, bits: usize) -> BigUint {
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    let excess = bytes.len() * 8 - bits;
    bytes[0] &= 0xff >> excess;
    BigUint::from_bytes_be(&bytes)
}

fn random_below(rng: &mut impl RngCore, bound: &BigUint) -> BigUint {
    loop {
        let x = random_bits(rng, bound.bits() as usize);
        if &x < bound {
            return x;
        }
    }
}

const SMALL_PRIMES: [u32; 53] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251,
];

fn random_prime(rng: &mut impl RngCore, bits: usize) -> BigUint {
    loop {
        let mut c = random_bits(rng, bits);
        // Top two bits set so the product has exactly 2 · bits bits.
        c.set_bit(bits as u64 - 1, true);
        c.set_bit(bits as u64 - 2, true);
        c.set_bit(0, true);
        if SMALL_PRIMES.iter().any(|&p| (&c % p).is_zero()) {
            continue;
        }
        if is_probable_prime(&c, 32, rng) {
            return c;
        }
    }
}

/// Miller-Rabin with `rounds` random bases.
pub(crate) fn is_probable_prime(n: &BigUint, rounds: usize, rng: &mut impl RngCore) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    if n == &two || n == &BigUint::from(3u32) {
        return true;
    }
    if n.is_even() {
        return false;
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = loop {
            let a = random_below(rng, &n_minus_1);
            if a >= two {
                break a;
            }
        };
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;

    pub(crate) fn test_keys() -> &'static KeyPair {
        static KP: OnceLock<KeyPair> = OnceLock::new();
        KP.get_or_init(|| KeyPair::from_seed([9u8; 32]))
    }

    #[test]
    fn miller_rabin_on_known_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for p in [2u64, 3, 5, 97, 7919, 2_147_483_647, 1_000_000_007] {
            assert!(is_probable_prime(&BigUint::from(p), 16, &mut rng), "{p}");
        }
        for c in [1u64, 4, 561, 1105, 7917, 2_147_483_649, 1_000_000_008] {
            assert!(!is_probable_prime(&BigUint::from(c), 16, &mut rng), "{c}");
        }
    }

    #[test]
    fn modulus_has_full_size() {
        assert_eq!(test_keys().public.modulus().bits(), MODULUS_BITS as u64);
    }

    #[test]
    fn additive_homomorphism() {
        let kp = test_keys();
        let pk = &kp.public;
        let sum = pk.add(&pk.encrypt_u64(2), &pk.encrypt_u64(3));
        assert_eq!(kp.decrypt(&sum).unwrap(), BigUint::from(5u32));
        let zero = pk.encrypt_u64(0);
        let a = pk.encrypt_u64(41);
        assert_eq!(kp.decrypt(&pk.add(&a, &zero)).unwrap(), BigUint::from(41u32));
        assert_ne!(pk.encrypt_u64(7), pk.encrypt_u64(7));
        let big = pk.add(&pk.encrypt_u64(u64::MAX), &pk.encrypt_u64(u64::MAX));
        assert_eq!(kp.decrypt(&big).unwrap(), BigUint::from(u64::MAX) * 2u32);
    }

    #[test]
    fn serialization_round_trip() {
        let kp = test_keys();
        let c = kp.public.encrypt_u64(12345);
        let bytes = kp.public.to_bytes(&c);
        assert_eq!(bytes.len(), CIPHERTEXT_LEN);
        assert_eq!(kp.public.from_bytes(&bytes).unwrap(), c);
        assert!(kp.public.from_bytes(&bytes[1..]).is_err());
    }

    #[test]
    fn same_seed_same_key() {
        let a = KeyPair::from_seed([9u8; 32]);
        assert_eq!(a.public.modulus(), test_keys().public.modulus());
    }
}
