//! Sparse associative arrays keyed by byte strings.
//!
//! An [`AssocArray`] maps `(row, col)` key pairs to numbers or strings and is
//! closed under selection, element-wise combination, transpose, threshold and
//! key-matched matrix multiply. The numeric type is generic over [`Scalar`];
//! [`Assoc`] is the `f64` instantiation used throughout the pipeline.

mod array;
mod error;
mod key;
mod ops;
mod scalar;
pub mod schema;
mod spec;
pub mod text;
mod value;

pub use array::{AssocArray, CollisionRule};
pub use error::{Error, Result};
pub use key::Key;
pub use ops::CombineOp;
pub use scalar::Scalar;
pub use spec::{KeyEncoding, KeySpec};
pub use value::{Triple, Value};

pub type Assoc = AssocArray<f64>;
pub type AssocF32 = AssocArray<f32>;
pub type Triple64 = Triple<f64>;
pub type Value64 = Value<f64>;
