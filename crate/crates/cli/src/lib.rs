//! Command-line surface and benchmark harness.

pub mod bench;
mod cli;

pub use cli::{execute, parse_spec, run, Cli, Command, UsageError};
