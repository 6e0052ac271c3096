//! Embedded, persistent, sorted triple tables.
//!
//! A table is an append-only log of checksummed records replayed into an
//! in-memory index on open. The store treats keys and values as opaque
//! bytes, so masked arrays are stored exactly like plain ones; only the
//! table metadata records that a table is masked and under which policy.

mod error;
mod index;
mod lock;
pub mod log;
mod table;

pub use error::{Result, StoreError};
pub use table::{Table, TableMeta};
