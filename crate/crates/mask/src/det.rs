//! Deterministic encryption of byte strings.
//!
//! The input is PKCS#7-padded to whole 16-byte blocks and enciphered with
//! two chained AES passes, forward then backward. The result is a
//! length-preserving permutation of the padded message in which every
//! output block depends on every input block, so equal plaintexts (and only
//! those) give equal ciphertexts and shared prefixes do not show through.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;

use crate::error::{MaskError, Result};

pub const BLOCK: usize = 16;

#[derive(Clone)]
pub struct DetCipher {
    aes: Aes128,
}

impl DetCipher {
    pub fn new(key: &[u8; 16]) -> Self {
        DetCipher { aes: Aes128::new(GenericArray::from_slice(key)) }
    }

    pub fn encrypt(&self, m: &[u8]) -> Result<Vec<u8>> {
        if m.is_empty() {
            return Err(MaskError::EmptyPlaintext);
        }
        let pad = BLOCK - m.len() % BLOCK;
        let mut buf = Vec::with_capacity(m.len() + pad);
        buf.extend_from_slice(m);
        buf.resize(m.len() + pad, pad as u8);

        let mut chain = [0u8; BLOCK];
        for block in buf.chunks_exact_mut(BLOCK) {
            xor(block, &chain);
            self.aes.encrypt_block(GenericArray::from_mut_slice(block));
            chain.copy_from_slice(block);
        }
        chain = [0u8; BLOCK];
        for block in buf.rchunks_exact_mut(BLOCK) {
            xor(block, &chain);
            self.aes.encrypt_block(GenericArray::from_mut_slice(block));
            chain.copy_from_slice(block);
        }
        Ok(buf)
    }

    pub fn decrypt(&self, c: &[u8]) -> Result<Vec<u8>> {
        if c.is_empty() || c.len() % BLOCK != 0 {
            return Err(MaskError::DecryptFailure(format!("ciphertext length {} is not a whole number of blocks", c.len())));
        }
        let mut buf = c.to_vec();
        let n = buf.len() / BLOCK;
        // Undo the backward pass: block i was chained with output block i + 1.
        for i in 0..n {
            let next: [u8; BLOCK] = if i + 1 < n { c[(i + 1) * BLOCK..(i + 2) * BLOCK].try_into().unwrap() } else { [0; BLOCK] };
            let block = &mut buf[i * BLOCK..(i + 1) * BLOCK];
            self.aes.decrypt_block(GenericArray::from_mut_slice(block));
            xor(block, &next);
        }
        // Undo the forward pass, walking backwards so the previous block is
        // still the intermediate value.
        for i in (0..n).rev() {
            let (head, tail) = buf.split_at_mut(i * BLOCK);
            let block = &mut tail[..BLOCK];
            self.aes.decrypt_block(GenericArray::from_mut_slice(block));
            if i > 0 {
                xor(block, &head[(i - 1) * BLOCK..]);
            }
        }
        let pad = *buf.last().unwrap() as usize;
        if pad == 0 || pad > BLOCK || buf.len() <= pad || !buf[buf.len() - pad..].iter().all(|&b| b as usize == pad) {
            return Err(MaskError::DecryptFailure("bad padding (wrong key or corrupt ciphertext)".into()));
        }
        buf.truncate(buf.len() - pad);
        Ok(buf)
    }
}

#[inline]
fn xor(block: &mut [u8], other: &[u8]) {
    for (a, b) in block.iter_mut().zip(other) {
        *a ^= b;
    }
}
