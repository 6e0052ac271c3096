use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmd_analytics::{dna_match, kmerize, log_graph, masked_dna_match, masked_log_graph, parse_fasta};
use cmd_core::schema::{explode, parse_dense, ExplodeConfig};
use cmd_core::{text, Assoc, Key, KeySpec};
use cmd_mask::{file as mask_file, mask_array, mask_spec, str_mask, unmask_array, MaskKeySet, MaskPolicy, MaskedArray, Salt, Scheme};
use cmd_store::Table;

use crate::bench::{self, RunConfig, Workload};

/// Error caused by how the command was invoked rather than by its data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(name = "cmd", version, about = "Compute on masked associative arrays")]
pub struct Cli {
    /// Worker threads for sparse multiply (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write to this file instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Store directory
    #[arg(long)]
    pub store: PathBuf,
    /// Table name
    #[arg(long)]
    pub table: String,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct MatchMode {
    /// Match on plaintext and print the match triples
    #[arg(long)]
    pub plain: bool,
    /// Mask the k-mer array, match on it and print the masked result
    #[arg(long)]
    pub masked: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BenchWorkload {
    Dna,
    Tweets,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explode a CSV table into D4M triples (column|value, 1)
    Explode {
        input: PathBuf,
        /// The CSV has no header row; columns are named c1, c2, ...
        #[arg(long)]
        no_header: bool,
        #[arg(long, default_value = "|")]
        delimiter: char,
        #[command(flatten)]
        out: Output,
    },
    /// Mask a triple file
    Mask {
        input: PathBuf,
        #[arg(long)]
        password: String,
        /// Policy file with rows=, cols= and values= lines (default DET,DET,CLEAR)
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Salt as 32 hex digits (default: random)
        #[arg(long)]
        salt: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Unmask a masked-array file
    Unmask {
        input: PathBuf,
        #[arg(long)]
        password: String,
        #[command(flatten)]
        out: Output,
    },
    /// Multiply two arrays; two masked inputs give a masked product
    Multiply {
        a: PathBuf,
        b: PathBuf,
        /// Multiply by the transpose of B
        #[arg(long)]
        transpose_b: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Shared k-mer counts between the sequences of a FASTA file
    Dnamatch {
        input: PathBuf,
        #[command(flatten)]
        mode: MatchMode,
        #[arg(long, default_value_t = cmd_analytics::DEFAULT_K)]
        k: usize,
        /// Keep counts strictly greater than this
        #[arg(long, default_value_t = 0.0)]
        cut: f64,
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        salt: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Co-occurrence graph between two exploded column prefixes
    Loggraph {
        input: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Mask the log first and compute on the masked form
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Append a triple or masked-array file to a table
    Put {
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Query a table; specs are `:` (all), `k1,k2` (exact), `pre*` (prefix) or `lo..hi` (range)
    Query {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, default_value = ":")]
        rows: String,
        #[arg(long, default_value = ":")]
        cols: String,
        /// For masked tables: mask the specs and unmask the result
        #[arg(long)]
        password: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Print a whole table
    Scan {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        password: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Rewrite a table without superseded records
    Compact {
        #[command(flatten)]
        table: TableArgs,
    },
    /// Mask one word for use in a query
    Strmask {
        word: String,
        #[arg(long)]
        password: String,
        #[arg(long, default_value = "DET")]
        scheme: Scheme,
        /// Salt as hex; alternatively take it from --store/--table
        #[arg(long)]
        salt: Option<String>,
        #[arg(long, requires = "table")]
        store: Option<PathBuf>,
        #[arg(long, requires = "store")]
        table: Option<String>,
    },
    /// Time plain against masked pipelines and print CSV
    Bench {
        workload: BenchWorkload,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated sizes (nnz for dna, tweets for tweets)
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = cmd_analytics::DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        cut: f64,
        #[arg(long, default_value_t = bench::MIN_REPS)]
        reps: usize,
        #[arg(long, default_value = "bench")]
        password: String,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Directory for benchmark tables (default: a temporary directory)
        #[arg(long)]
        store: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

fn read_input(path: &Path) -> anyhow::Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        return Ok(buf);
    }
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: &Output, bytes: &[u8]) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
        }
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn load_policy(path: Option<&Path>) -> anyhow::Result<MaskPolicy> {
    match path {
        Some(p) => Ok(MaskPolicy::parse_file(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?),
        None => Ok(MaskPolicy::default()),
    }
}

fn parse_salt(salt: Option<&str>) -> anyhow::Result<Salt> {
    match salt {
        Some(s) => Ok(Salt::from_hex(s)?),
        None => Ok(Salt::random()),
    }
}

fn derive(password: &str, salt: Salt) -> anyhow::Result<MaskKeySet> {
    Ok(MaskKeySet::derive(password.as_bytes(), salt)?)
}

/// Parses the spec syntax accepted by `query`.
pub fn parse_spec(s: &str) -> anyhow::Result<KeySpec> {
    if s.is_empty() || s == ":" {
        return Ok(KeySpec::All);
    }
    if let Some(p) = s.strip_suffix('*') {
        return Ok(KeySpec::prefix(p));
    }
    if let Some((lo, hi)) = s.split_once("..") {
        return Ok(KeySpec::range(lo, hi)?);
    }
    Ok(KeySpec::exact(s.split(',').filter(|k| !k.is_empty()).map(Key::from)))
}

enum Loaded {
    Plain(Assoc),
    Masked(MaskedArray),
}

fn load_array(path: &Path) -> anyhow::Result<Loaded> {
    let bytes = read_input(path)?;
    if mask_file::is_masked(&bytes) {
        Ok(Loaded::Masked(mask_file::from_bytes(&bytes)?))
    } else {
        Ok(Loaded::Plain(text::from_bytes(&bytes)?))
    }
}

fn masked_bytes(m: &MaskedArray) -> Vec<u8> {
    mask_file::to_bytes(m)
}

fn table_keys(t: &Table, password: &str) -> anyhow::Result<(MaskKeySet, MaskPolicy)> {
    let meta = t.meta().ok_or_else(|| UsageError(format!("table {} is not masked; drop --password", t.name())))?;
    Ok((derive(password, meta.salt)?, meta.policy))
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Explode { input, no_header, delimiter, out } => {
            if !delimiter.is_ascii() {
                return usage("the delimiter must be a single ASCII character");
            }
            let table = parse_dense(&read_input(&input)?, !no_header)?;
            let a: Assoc = explode(&table, ExplodeConfig { delimiter: delimiter as u8 })?;
            emit(&out, &text::to_bytes(&a))
        }
        Command::Mask { input, password, policy, salt, out } => {
            let policy = load_policy(policy.as_deref())?;
            let a: Assoc = text::from_bytes(&read_input(&input)?)?;
            let keys = derive(&password, parse_salt(salt.as_deref())?)?;
            emit(&out, &masked_bytes(&mask_array(&a, policy, &keys)?))
        }
        Command::Unmask { input, password, out } => {
            let m: MaskedArray = mask_file::from_bytes(&read_input(&input)?)?;
            let keys = derive(&password, m.salt)?;
            emit(&out, &text::to_bytes(&unmask_array(&m, &keys)?))
        }
        Command::Multiply { a, b, transpose_b, out } => match (load_array(&a)?, load_array(&b)?) {
            (Loaded::Plain(a), Loaded::Plain(b)) => {
                let b = if transpose_b { b.transpose() } else { b };
                emit(&out, &text::to_bytes(&a.multiply(&b)))
            }
            (Loaded::Masked(a), Loaded::Masked(b)) => {
                let b = if transpose_b { b.transpose() } else { b };
                emit(&out, &masked_bytes(&a.multiply(&b)?))
            }
            _ => usage("cannot multiply a masked array by a plain one"),
        },
        Command::Dnamatch { input, mode, k, cut, password, policy, salt, out } => {
            let seqs = parse_fasta(&read_input(&input)?)?;
            if mode.plain {
                let a: Assoc = kmerize(&seqs, k)?;
                return emit(&out, &text::to_bytes(&dna_match(&a, cut)?.x));
            }
            let Some(password) = password else { return usage("--masked needs --password") };
            let keys = derive(&password, parse_salt(salt.as_deref())?)?;
            let run = masked_dna_match::<f64>(&seqs, k, cut, load_policy(policy.as_deref())?, &keys)?;
            if run.unmasked.x != run.plain.x {
                bail!("masked match does not unmask to the plaintext match");
            }
            emit(&out, &masked_bytes(&run.masked))
        }
        Command::Loggraph { input, a, b, password, policy, out } => {
            let e: Assoc = text::from_bytes(&read_input(&input)?)?;
            match password {
                None => emit(&out, &text::to_bytes(&log_graph(&e, a.as_bytes(), b.as_bytes())?)),
                Some(password) => {
                    let keys = derive(&password, Salt::random())?;
                    let m = mask_array(&e, load_policy(policy.as_deref())?, &keys)?;
                    let g = masked_log_graph(&m, e.cols(), a.as_bytes(), b.as_bytes(), &keys)?;
                    emit(&out, &masked_bytes(&g))
                }
            }
        }
        Command::Put { input, table } => {
            let t = Table::open(&table.store, &table.table, true)?;
            let n = match load_array(&input)? {
                Loaded::Plain(a) => t.put(&a)?,
                Loaded::Masked(m) => t.put_masked(&m)?,
            };
            println!("{n}");
            Ok(())
        }
        Command::Query { table, rows, cols, password, out } => {
            let t = Table::open(&table.store, &table.table, false)?;
            let (rows, cols) = (parse_spec(&rows)?, parse_spec(&cols)?);
            match (t.meta(), password) {
                (None, None) => emit(&out, &text::to_bytes(&t.query::<f64>(&rows, &cols)?)),
                (Some(_), None) => emit(&out, &masked_bytes(&t.query_masked(&rows, &cols)?)),
                (_, Some(password)) => {
                    let (keys, policy) = table_keys(&t, &password)?;
                    let rows = mask_spec(&rows, &keys, policy.rows)?;
                    let cols = mask_spec(&cols, &keys, policy.cols)?;
                    emit(&out, &text::to_bytes(&unmask_array(&t.query_masked::<f64>(&rows, &cols)?, &keys)?))
                }
            }
        }
        Command::Scan { table, password, out } => {
            let t = Table::open(&table.store, &table.table, false)?;
            match (t.meta(), password) {
                (None, None) => emit(&out, &text::to_bytes(&t.scan::<f64>()?)),
                (Some(_), None) => emit(&out, &masked_bytes(&t.query_masked(&KeySpec::All, &KeySpec::All)?)),
                (_, Some(password)) => {
                    let (keys, _) = table_keys(&t, &password)?;
                    emit(&out, &text::to_bytes(&unmask_array(&t.query_masked::<f64>(&KeySpec::All, &KeySpec::All)?, &keys)?))
                }
            }
        }
        Command::Compact { table } => {
            Table::open(&table.store, &table.table, false)?.compact()?;
            Ok(())
        }
        Command::Strmask { word, password, scheme, salt, store, table } => {
            let salt = match (salt, store, table) {
                (Some(s), None, None) => Salt::from_hex(&s)?,
                (None, Some(store), Some(table)) => {
                    let t = Table::open(&store, &table, false)?;
                    t.meta().ok_or_else(|| UsageError(format!("table {table} is not masked")))?.salt
                }
                _ => return usage("give either --salt or --store with --table"),
            };
            if !scheme.is_key_scheme() || scheme == Scheme::Clear {
                return usage("--scheme must be DET or OPE");
            }
            let c = str_mask(word.as_bytes(), &derive(&password, salt)?, scheme)?;
            println!("{}", c.to_base64());
            Ok(())
        }
        Command::Bench { workload, seed, sizes, k, cut, reps, password, policy, store, out } => {
            let workload = match workload {
                BenchWorkload::Dna => Workload::Dna,
                BenchWorkload::Tweets => Workload::Tweets,
            };
            let tmp = tempfile::tempdir()?;
            let mut cfg = RunConfig::new(workload, store.unwrap_or_else(|| tmp.path().to_path_buf()));
            cfg.seed = seed;
            if let Some(sizes) = sizes {
                cfg.sizes = sizes;
            }
            cfg.k = k;
            cfg.cut = cut;
            cfg.reps = reps;
            cfg.password = password;
            cfg.policy = load_policy(policy.as_deref())?;
            if let Err(e @ bench::BenchError::Config(_)) = cfg.validate() {
                return usage(e.to_string());
            }
            let records = match workload {
                Workload::Dna => bench::bench_dna(&cfg)?,
                Workload::Tweets => bench::bench_tweets(&cfg)?,
            };
            let mut buf = Vec::new();
            bench::write_csv(&mut buf, &records)?;
            emit(&out, &buf)
        }
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on usage errors, 2 on data or crypto errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let threads = cli.threads;
    let result = match threads {
        Some(0) => usage("--threads must be at least 1"),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli)),
            Err(e) => Err(e.into()),
        },
        None => execute(cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                1
            } else {
                2
            }
        }
    }
}
