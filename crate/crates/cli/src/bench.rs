//! Timing harness for the DNA-match and tweet insert/query workloads.
//!
//! Every phase is timed `reps` times after one discarded warm-up run and
//! reported as the median. Phases that are compared against each other are
//! timed alternately so that drift in machine speed affects both alike. A
//! size's rows are only emitted after its masked result has been unmasked
//! and checked against the plaintext result.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use cmd_analytics::synth::{dna_corpus, tweets, PROBE_TAG};
use cmd_analytics::{dna_match, kmerize, masked_match};
use cmd_core::schema::{explode, ExplodeConfig};
use cmd_core::{text, Assoc, Key, KeySpec};
use cmd_mask::{file as mask_file, mask_array, mask_spec, unmask_array, MaskKeySet, MaskPolicy, MaskedArray, Salt};
use cmd_store::Table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = ["workload", "size", "phase", "seconds", "reps"];
pub const MIN_REPS: usize = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("{workload} at size {size}: masked result does not unmask to the plaintext result ({detail})")]
    CorrectnessFailure { workload: Workload, size: usize, detail: String },
    #[error(transparent)]
    Analytics(#[from] cmd_analytics::AnalyticsError),
    #[error(transparent)]
    Mask(#[from] cmd_mask::MaskError),
    #[error(transparent)]
    Store(#[from] cmd_store::StoreError),
    #[error(transparent)]
    Core(#[from] cmd_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    Dna,
    Tweets,
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Workload::Dna => "dna",
            Workload::Tweets => "tweets",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Mask,
    ComputeMasked,
    ComputePlain,
    Unmask,
    InsertMasked,
    InsertPlain,
    QueryMasked,
    QueryPlain,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Mask => "mask",
            Phase::ComputeMasked => "compute_masked",
            Phase::ComputePlain => "compute_plain",
            Phase::Unmask => "unmask",
            Phase::InsertMasked => "insert_masked",
            Phase::InsertPlain => "insert_plain",
            Phase::QueryMasked => "query_masked",
            Phase::QueryPlain => "query_plain",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub workload: Workload,
    pub size: usize,
    pub phase: Phase,
    pub seconds: f64,
    pub reps: usize,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub k: usize,
    pub cut: f64,
    pub policy: MaskPolicy,
    pub password: String,
    pub store: PathBuf,
    pub reps: usize,
    /// Queries per timed tweet-query batch.
    pub query_batch: usize,
}

impl RunConfig {
    pub fn new(workload: Workload, store: PathBuf) -> Self {
        let sizes = match workload {
            Workload::Dna => vec![1_000, 10_000, 100_000],
            Workload::Tweets => vec![10_000, 20_000, 50_000],
        };
        RunConfig {
            seed: 1,
            sizes,
            k: cmd_analytics::DEFAULT_K,
            cut: 0.0,
            policy: MaskPolicy::default(),
            password: "bench".into(),
            store,
            reps: MIN_REPS,
            query_batch: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Config(m.into()));
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return bad("sizes must be positive and strictly increasing");
        }
        if self.reps < MIN_REPS {
            return bad("at least 5 repetitions are required");
        }
        if self.query_batch == 0 {
            return bad("query batch must be positive");
        }
        if self.password.is_empty() {
            return bad("password must be non-empty");
        }
        Ok(())
    }

    /// Keys under a salt drawn from the seed, so runs are reproducible.
    pub fn keys(&self) -> Result<MaskKeySet> {
        let salt = Salt(ChaCha8Rng::seed_from_u64(self.seed).gen());
        Ok(MaskKeySet::derive(self.password.as_bytes(), salt)?)
    }

    fn corpus_seed(&self, size: usize) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(size as u64)
    }
}

pub fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Median time of `f` over `reps` runs after a warm-up, with the last result.
pub fn time_median<R>(reps: usize, mut f: impl FnMut() -> Result<R>) -> Result<(Duration, R)> {
    f()?;
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let t = Instant::now();
        let r = f()?;
        times.push(t.elapsed());
        last = Some(r);
    }
    Ok((median(times), last.expect("reps > 0")))
}

/// Like [`time_median`] for two computations timed alternately.
pub fn time_paired<A, B>(
    reps: usize,
    mut fa: impl FnMut(usize) -> Result<A>,
    mut fb: impl FnMut(usize) -> Result<B>,
) -> Result<((Duration, A), (Duration, B))> {
    fa(0)?;
    fb(0)?;
    let (mut ta, mut tb) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    let (mut la, mut lb) = (None, None);
    for rep in 1..=reps {
        let t = Instant::now();
        la = Some(fa(rep)?);
        ta.push(t.elapsed());
        let t = Instant::now();
        lb = Some(fb(rep)?);
        tb.push(t.elapsed());
    }
    Ok(((median(ta), la.expect("reps > 0")), (median(tb), lb.expect("reps > 0"))))
}

fn record(workload: Workload, size: usize, phase: Phase, d: Duration, reps: usize) -> BenchRecord {
    BenchRecord { workload, size, phase, seconds: d.as_secs_f64(), reps }
}

pub fn bench_dna(cfg: &RunConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let keys = cfg.keys()?;
    let mut out = Vec::new();
    for &size in &cfg.sizes {
        let seqs = dna_corpus(cfg.corpus_seed(size), size, cfg.k);
        let a: Assoc = kmerize(&seqs, cfg.k)?;
        let (t_mask, m) = time_median(cfg.reps, || Ok(mask_array(&a, cfg.policy, &keys)?))?;
        let ((t_plain, plain), (t_masked, masked)) = time_paired(
            cfg.reps,
            |_| Ok(dna_match(&a, cfg.cut)?.x),
            |_| Ok(masked_match(&m, cfg.cut)?),
        )?;
        let (t_unmask, unmasked) = time_median(cfg.reps, || Ok(unmask_array(&masked, &keys)?))?;
        if unmasked != plain {
            return Err(BenchError::CorrectnessFailure {
                workload: Workload::Dna,
                size,
                detail: format!("{} entries unmasked, {} expected", unmasked.nnz(), plain.nnz()),
            });
        }
        for (phase, t) in [(Phase::Mask, t_mask), (Phase::ComputeMasked, t_masked), (Phase::ComputePlain, t_plain), (Phase::Unmask, t_unmask)] {
            out.push(record(Workload::Dna, size, phase, t, cfg.reps));
        }
    }
    Ok(out)
}

/// Exploded tweet corpus of `n` tweets.
pub fn tweet_array(seed: u64, n: usize) -> Result<Assoc> {
    Ok(explode(&tweets(seed, n), ExplodeConfig::default())?)
}

pub fn probe_column() -> Key {
    Key::from(format!("hashtag|{PROBE_TAG}"))
}

/// Sizes in bytes of the plain triple file and the masked-array file.
pub fn triple_file_sizes(e: &Assoc, policy: MaskPolicy, keys: &MaskKeySet) -> Result<(usize, usize)> {
    let m = mask_array(e, policy, keys)?;
    Ok((text::to_bytes(e).len(), mask_file::to_bytes(&m).len()))
}

fn fresh_dir(cfg: &RunConfig, label: &str) -> Result<PathBuf> {
    let dir = cfg.store.join(label);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

struct Tables {
    main: Table,
    transpose: Table,
}

fn insert_plain(dir: PathBuf, e: &Assoc) -> Result<Tables> {
    let et = e.transpose();
    let main = Table::open(&dir, "main", true)?;
    let transpose = Table::open(&dir, "main_t", true)?;
    main.put(e)?;
    transpose.put(&et)?;
    Ok(Tables { main, transpose })
}

fn insert_masked(dir: PathBuf, e: &Assoc, policy: MaskPolicy, keys: &MaskKeySet) -> Result<Tables> {
    let m = mask_array(e, policy, keys)?;
    let mt = m.transpose();
    let main = Table::open(&dir, "main", true)?;
    let transpose = Table::open(&dir, "main_t", true)?;
    main.put_masked(&m)?;
    transpose.put_masked(&mt)?;
    Ok(Tables { main, transpose })
}

fn per_query(batch: usize, f: &mut dyn FnMut() -> Result<Assoc>) -> Result<Assoc> {
    let mut last = Assoc::new();
    for _ in 0..batch {
        last = f()?;
    }
    Ok(last)
}

pub fn bench_tweets(cfg: &RunConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let keys = cfg.keys()?;
    let probe = KeySpec::exact([probe_column()]);
    let mut out = Vec::new();
    for &size in &cfg.sizes {
        let e = tweet_array(cfg.corpus_seed(size), size)?;
        let ((t_plain, plain), (t_masked, masked)) = time_paired(
            cfg.reps,
            |rep| insert_plain(fresh_dir(cfg, &format!("tweets-{size}-plain-{rep}"))?, &e),
            |rep| insert_masked(fresh_dir(cfg, &format!("tweets-{size}-masked-{rep}"))?, &e, cfg.policy, &keys),
        )?;
        let fail = |detail: String| BenchError::CorrectnessFailure { workload: Workload::Tweets, size, detail };
        if plain.main.scan::<f64>()? != e || plain.transpose.len() != e.nnz() {
            return Err(fail("plain tables do not hold the corpus".into()));
        }
        if unmask_array(&masked.main.query_masked::<f64>(&KeySpec::All, &KeySpec::All)?, &keys)? != e
            || unmask_array(&masked.transpose.query_masked::<f64>(&KeySpec::All, &KeySpec::All)?, &keys)? != e.transpose()
        {
            return Err(fail("masked tables do not unmask to the corpus".into()));
        }

        let batch = cfg.query_batch;
        let mut plain_query = || Ok(plain.main.query::<f64>(&KeySpec::All, &probe)?);
        let mut masked_query = || -> Result<Assoc> {
            let spec = mask_spec(&probe, &keys, cfg.policy.cols)?;
            let m: MaskedArray = masked.main.query_masked(&KeySpec::All, &spec)?;
            Ok(unmask_array(&m, &keys)?)
        };
        let ((tq_plain, q_plain), (tq_masked, q_masked)) = time_paired(
            cfg.reps,
            |_| per_query(batch, &mut plain_query),
            |_| per_query(batch, &mut masked_query),
        )?;
        let expected = e.select(&KeySpec::All, &probe)?;
        if q_plain != expected || q_masked != q_plain {
            return Err(fail(format!(
                "probe query returned {} plain and {} unmasked entries, {} expected",
                q_plain.nnz(),
                q_masked.nnz(),
                expected.nnz()
            )));
        }
        for label in ["plain", "masked"] {
            for rep in 0..=cfg.reps {
                let dir = cfg.store.join(format!("tweets-{size}-{label}-{rep}"));
                if dir.exists() {
                    fs::remove_dir_all(dir)?;
                }
            }
        }
        let q = batch as u32;
        for (phase, t) in [
            (Phase::InsertMasked, t_masked),
            (Phase::InsertPlain, t_plain),
            (Phase::QueryMasked, tq_masked / q),
            (Phase::QueryPlain, tq_plain / q),
        ] {
            out.push(record(Workload::Tweets, size, phase, t, cfg.reps));
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(w: W, records: &[BenchRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in records {
        wtr.write_record([
            r.workload.to_string(),
            r.size.to_string(),
            r.phase.to_string(),
            format!("{:.9}", r.seconds),
            r.reps.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Median seconds of one phase at one size.
pub fn seconds(records: &[BenchRecord], size: usize, phase: Phase) -> Option<f64> {
    records.iter().find(|r| r.size == size && r.phase == phase).map(|r| r.seconds)
}
