use std::fmt;
use std::sync::{Arc, OnceLock};

use argon2::{Algorithm, Argon2, Params, Version};
use rand::RngCore;

use crate::det::DetCipher;
use crate::error::{MaskError, Result};
use crate::hom::KeyPair;
use crate::ope::OpeCipher;
use crate::rnd::RndCipher;

/// Per-table random value mixed into key derivation. Stored in the clear.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Salt(pub [u8; 16]);

impl Salt {
    pub fn random() -> Self {
        let mut s = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut s);
        Salt(s)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| MaskError::Parse(format!("salt: {e}")))?;
        let arr: [u8; 16] = bytes.try_into().map_err(|_| MaskError::Parse("salt must be 16 bytes".into()))?;
        Ok(Salt(arr))
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Salt({})", self.to_hex())
    }
}

// Argon2id cost: 8 MiB, 3 passes, 1 lane.
const KDF_MEMORY_KIB: u32 = 8 * 1024;
const KDF_PASSES: u32 = 3;
const KDF_OUTPUT: usize = 16 * 3 + 32;

/// Keys for every masking scheme, all derived from one password and salt.
#[derive(Clone)]
pub struct MaskKeySet {
    salt: Salt,
    det_key: [u8; 16],
    ope_key: [u8; 16],
    rnd_key: [u8; 16],
    hom_seed: [u8; 32],
    det: DetCipher,
    ope: OpeCipher,
    rnd: RndCipher,
    // Prime generation is slow; only arrays with homomorphic values need it.
    hom: Arc<OnceLock<KeyPair>>,
}

impl MaskKeySet {
    pub fn derive(password: &[u8], salt: Salt) -> Result<Self> {
        if password.is_empty() {
            return Err(MaskError::EmptyPassword);
        }
        let params = Params::new(KDF_MEMORY_KIB, KDF_PASSES, 1, Some(KDF_OUTPUT)).map_err(|e| MaskError::Kdf(e.to_string()))?;
        let mut out = [0u8; KDF_OUTPUT];
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
            .hash_password_into(password, &salt.0, &mut out)
            .map_err(|e| MaskError::Kdf(e.to_string()))?;
        let det_key: [u8; 16] = out[0..16].try_into().unwrap();
        let ope_key: [u8; 16] = out[16..32].try_into().unwrap();
        let rnd_key: [u8; 16] = out[32..48].try_into().unwrap();
        let hom_seed: [u8; 32] = out[48..80].try_into().unwrap();
        Ok(MaskKeySet {
            salt,
            det_key,
            ope_key,
            rnd_key,
            hom_seed,
            det: DetCipher::new(&det_key),
            ope: OpeCipher::new(&ope_key),
            rnd: RndCipher::new(&rnd_key),
            hom: Arc::new(OnceLock::new()),
        })
    }

    pub fn salt(&self) -> Salt {
        self.salt
    }

    pub fn det(&self) -> &DetCipher {
        &self.det
    }

    pub fn ope(&self) -> &OpeCipher {
        &self.ope
    }

    pub fn rnd(&self) -> &RndCipher {
        &self.rnd
    }

    pub fn hom(&self) -> &KeyPair {
        self.hom.get_or_init(|| KeyPair::from_seed(self.hom_seed))
    }

    /// Raw key material, in order: DET, OPE, RND keys and the HOM+ seed.
    pub fn key_bytes(&self) -> ([u8; 16], [u8; 16], [u8; 16], [u8; 32]) {
        (self.det_key, self.ope_key, self.rnd_key, self.hom_seed)
    }
}

impl fmt::Debug for MaskKeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaskKeySet").field("salt", &self.salt).finish_non_exhaustive()
    }
}
