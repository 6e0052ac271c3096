//! Password-keyed masking of associative arrays.
//!
//! Row and column keys are masked with deterministic (`DET`) or
//! order-preserving (`OPE`) encryption, values with randomized (`RND`) or
//! additively homomorphic (`HOMPLUS`) encryption, or left `CLEAR`. Keys are
//! carried as Base64 text so masked arrays remain ordinary associative
//! arrays that any sparse engine or store can process unchanged.

pub mod det;
mod error;
pub mod file;
pub mod hom;
mod keys;
mod masked;
pub mod ope;
mod policy;
pub mod rnd;

pub use error::{MaskError, Result};
pub use keys::{MaskKeySet, Salt};
pub use masked::{axis_encoding, mask_array, mask_key, mask_spec, str_mask, unmask_array, unmask_key, MaskedArray};
pub use policy::{Ciphertext, MaskPolicy, Scheme};
