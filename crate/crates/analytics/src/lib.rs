//! Sequence matching and log-graph pipelines that run unchanged on plain or
//! masked associative arrays.

mod dna;
mod error;
mod loggraph;
pub mod synth;

pub use dna::{
    dna_match, kmerize, masked_dna_match, masked_match, parse_fasta, write_fasta, MaskedMatch, MatchResult, MatchTimings,
    SequenceRecord, DEFAULT_K,
};
pub use error::{AnalyticsError, Result};
pub use loggraph::{expand_prefix, log_graph, masked_log_graph};
