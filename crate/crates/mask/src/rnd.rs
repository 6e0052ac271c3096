//! Randomized authenticated encryption: AES-128-GCM under a fresh 96-bit
//! nonce per message. Output is `nonce ∥ ciphertext ∥ tag`.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce};
use rand::RngCore;

use crate::error::{MaskError, Result};

const NONCE: usize = 12;
const TAG: usize = 16;

#[derive(Clone)]
pub struct RndCipher {
    aead: Aes128Gcm,
}

impl RndCipher {
    pub fn new(key: &[u8; 16]) -> Self {
        RndCipher { aead: Aes128Gcm::new(key.into()) }
    }

    pub fn encrypt(&self, m: &[u8]) -> Vec<u8> {
        let mut nonce = [0u8; NONCE];
        rand::thread_rng().fill_bytes(&mut nonce);
        let ct = self.aead.encrypt(Nonce::from_slice(&nonce), m).expect("AES-GCM encryption does not fail for in-memory buffers");
        let mut out = Vec::with_capacity(NONCE + ct.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&ct);
        out
    }

    pub fn decrypt(&self, c: &[u8]) -> Result<Vec<u8>> {
        if c.len() < NONCE + TAG {
            return Err(MaskError::AuthFailure);
        }
        let (nonce, body) = c.split_at(NONCE);
        self.aead.decrypt(Nonce::from_slice(nonce), body).map_err(|_| MaskError::AuthFailure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_ciphertexts_and_round_trip() {
        let r = RndCipher::new(&[1u8; 16]);
        let a = r.encrypt(b"cited");
        let b = r.encrypt(b"cited");
        assert_ne!(a, b);
        assert_eq!(r.decrypt(&a).unwrap(), b"cited");
        assert_eq!(r.decrypt(&r.encrypt(b"")).unwrap(), b"");
        assert_eq!(a.len(), NONCE + 5 + TAG);
    }

    #[test]
    fn every_single_bit_flip_is_caught() {
        let r = RndCipher::new(&[1u8; 16]);
        let c = r.encrypt(b"n:47");
        for bit in 0..c.len() * 8 {
            let mut t = c.clone();
            t[bit / 8] ^= 1 << (bit % 8);
            assert!(matches!(r.decrypt(&t), Err(MaskError::AuthFailure)), "bit {bit}");
        }
        assert!(r.decrypt(&c[..10]).is_err());
        assert!(RndCipher::new(&[2u8; 16]).decrypt(&c).is_err());
    }
}
