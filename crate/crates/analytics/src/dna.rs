use std::collections::HashSet;
use std::time::{Duration, Instant};

use cmd_core::{AssocArray, CollisionRule, Key, Scalar, Triple};
use cmd_mask::{mask_array, unmask_array, MaskError, MaskKeySet, MaskPolicy, MaskedArray, Scheme};

use crate::error::{AnalyticsError, Result};

pub const DEFAULT_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: Key,
    pub bases: Vec<u8>,
}

impl SequenceRecord {
    pub fn new(id: impl Into<Key>, bases: impl Into<Vec<u8>>) -> Self {
        SequenceRecord { id: id.into(), bases: bases.into() }
    }

    fn check(&self) -> Result<()> {
        match self.bases.iter().position(|b| !b"ACGT".contains(b)) {
            Some(pos) => Err(AnalyticsError::InvalidBase { id: self.id.to_string(), base: self.bases[pos] as char, pos }),
            None => Ok(()),
        }
    }
}

/// Parses FASTA text. The id is the first word of each `>` line; sequence
/// lines are concatenated and upper-cased.
pub fn parse_fasta(text: &[u8]) -> Result<Vec<SequenceRecord>> {
    let mut out: Vec<SequenceRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.split(|&b| b == b'\n').enumerate() {
        let line = raw.strip_suffix(b"\r").unwrap_or(raw).trim_ascii();
        if line.is_empty() || line.starts_with(b";") {
            continue;
        }
        if let Some(header) = line.strip_prefix(b">") {
            let id = header.split(|b| b.is_ascii_whitespace()).next().unwrap_or_default();
            if id.is_empty() {
                return Err(AnalyticsError::Fasta { line: i + 1, msg: "header without an id".into() });
            }
            if !seen.insert(id.to_vec()) {
                return Err(AnalyticsError::DuplicateId(String::from_utf8_lossy(id).into_owned()));
            }
            out.push(SequenceRecord::new(id, Vec::new()));
            continue;
        }
        let rec = out.last_mut().ok_or_else(|| AnalyticsError::Fasta { line: i + 1, msg: "sequence data before the first header".into() })?;
        rec.bases.extend(line.iter().map(u8::to_ascii_uppercase));
    }
    for rec in &out {
        rec.check()?;
    }
    Ok(out)
}

pub fn write_fasta(seqs: &[SequenceRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in seqs {
        out.push(b'>');
        out.extend_from_slice(s.id.as_bytes());
        out.push(b'\n');
        for chunk in s.bases.chunks(70) {
            out.extend_from_slice(chunk);
            out.push(b'\n');
        }
    }
    out
}

/// Sequence-id by k-mer presence array: one entry of 1 per distinct k-mer.
pub fn kmerize<T: Scalar>(seqs: &[SequenceRecord], k: usize) -> Result<AssocArray<T>> {
    if k == 0 {
        return Err(AnalyticsError::InvalidK);
    }
    let mut ids = HashSet::new();
    let mut triples = Vec::new();
    for s in seqs {
        s.check()?;
        if s.bases.len() < k {
            return Err(AnalyticsError::SequenceTooShort { id: s.id.to_string(), len: s.bases.len(), k });
        }
        if !ids.insert(&s.id) {
            return Err(AnalyticsError::DuplicateId(s.id.to_string()));
        }
        let distinct: HashSet<&[u8]> = s.bases.windows(k).collect();
        triples.extend(distinct.into_iter().map(|w| Triple::new(s.id.clone(), w, T::one())));
    }
    Ok(AssocArray::from_triples(triples, CollisionRule::LastWins)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult<T: Scalar = f64> {
    pub x: AssocArray<T>,
    pub cut: T,
}

/// Shared k-mer counts between sequences, keeping counts above `cut`.
pub fn dna_match<T: Scalar>(a: &AssocArray<T>, cut: T) -> Result<MatchResult<T>> {
    Ok(MatchResult { x: a.multiply(&a.transpose()).threshold(cut)?, cut })
}

pub fn masked_match<T: Scalar>(m: &MaskedArray<T>, cut: T) -> Result<MaskedArray<T>> {
    Ok(m.multiply(&m.transpose())?.threshold(cut)?)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MatchTimings {
    pub mask: Duration,
    pub compute_masked: Duration,
    pub compute_plain: Duration,
    pub unmask: Duration,
}

#[derive(Clone, Debug)]
pub struct MaskedMatch<T: Scalar = f64> {
    pub masked: MaskedArray<T>,
    pub unmasked: MatchResult<T>,
    pub plain: MatchResult<T>,
    pub timings: MatchTimings,
}

/// Runs the match on plaintext and on the masked corpus, timing each phase.
pub fn masked_dna_match<T: Scalar>(
    seqs: &[SequenceRecord],
    k: usize,
    cut: T,
    policy: MaskPolicy,
    keys: &MaskKeySet,
) -> Result<MaskedMatch<T>> {
    if policy.values != Scheme::Clear {
        return Err(MaskError::PolicyMismatch(format!("match counts need CLEAR values, policy has {}", policy.values)).into());
    }
    let a = kmerize::<T>(seqs, k)?;
    let mut timings = MatchTimings::default();

    let t = Instant::now();
    let plain = dna_match(&a, cut)?;
    timings.compute_plain = t.elapsed();

    let t = Instant::now();
    let m = mask_array(&a, policy, keys)?;
    timings.mask = t.elapsed();

    let t = Instant::now();
    let masked = masked_match(&m, cut)?;
    timings.compute_masked = t.elapsed();

    let t = Instant::now();
    let x = unmask_array(&masked, keys)?;
    timings.unmask = t.elapsed();

    Ok(MaskedMatch { masked, unmasked: MatchResult { x, cut }, plain, timings })
}
