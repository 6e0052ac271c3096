//! Seeded synthetic corpora for tests and benchmarks.

use cmd_core::schema::DenseTable;
use cmd_core::Key;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::dna::SequenceRecord;

const BASES: &[u8; 4] = b"ACGT";

fn random_bases(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| BASES[rng.gen_range(0..4)]).collect()
}

fn accession(i: usize) -> String {
    format!("SY{:06}.1:PR{:05}.1", 100_000 + i, 10_000 + i)
}

/// Windows per generated sequence.
pub const KMERS_PER_SEQUENCE: usize = 100;

/// A corpus of roughly `target_nnz` distinct (sequence, k-mer) pairs.
///
/// Sequences come in families of four: a random ancestor and three
/// descendants, each with a few point mutations, so family members share
/// most of their k-mers and unrelated sequences share almost none.
pub fn dna_corpus(seed: u64, target_nnz: usize, k: usize) -> Vec<SequenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = target_nnz.div_ceil(KMERS_PER_SEQUENCE).max(1);
    let len = KMERS_PER_SEQUENCE + k - 1;
    let mut out = Vec::with_capacity(n);
    let mut ancestor = Vec::new();
    for i in 0..n {
        if i % 4 == 0 {
            ancestor = random_bases(&mut rng, len);
            out.push(SequenceRecord::new(accession(i), ancestor.clone()));
            continue;
        }
        let mut s = ancestor.clone();
        for _ in 0..rng.gen_range(1..=3) {
            let pos = rng.gen_range(0..len);
            s[pos] = BASES[(BASES.iter().position(|&b| b == s[pos]).unwrap() + rng.gen_range(1..4)) % 4];
        }
        out.push(SequenceRecord::new(accession(i), s));
    }
    out
}

/// Eight sequences whose k = 10 match matrix at cut 0 has a known shape:
/// a 3 x 3 block of ones among the last three related sequences, a
/// self-match of 2 for the one sequence with two k-mers, and one off-diagonal
/// 1 between that sequence and its one-base-shorter suffix.
pub fn eight_sequences() -> Vec<SequenceRecord> {
    let seqs = [
        ("AC009901.1:AAF00001.1", "ACGTTGCAAC"),
        ("AC009902.1:AAF00002.1", "GGGCCCATAT"),
        ("AC009903.1:AAF00003.1", "TTAGCCGATCG"),
        ("AC009904.1:AAF00004.1", "TAGCCGATCG"),
        ("AC009905.1:AAF00005.1", "CATCATGGTA"),
        ("AC009906.1:AAF00006.1", "CATCATGGTA"),
        ("AC009907.1:AAF00007.1", "CATCATGGTA"),
        ("AC009908.1:AAF00008.1", "AAAACCCCGT"),
    ];
    seqs.into_iter().map(|(id, b)| SequenceRecord::new(id, b)).collect()
}

/// Hashtag planted in a fixed number of tweets regardless of corpus size.
pub const PROBE_TAG: &str = "#cmdprobe";
pub const PROBE_COUNT: usize = 64;
pub const TWEET_WORDS: usize = 6;
const VOCAB: usize = 20_000;
const TAGS: usize = 500;
const SYLLABLES: [&str; 16] = ["ka", "lo", "mi", "ne", "ru", "sa", "te", "vi", "po", "da", "ze", "fu", "gi", "ho", "ja", "we"];
const LANGS: [(&str, u32); 6] = [("en", 50), ("es", 15), ("ja", 12), ("pt", 10), ("fr", 8), ("de", 5)];

/// Pseudo-word for vocabulary index `i`, at most eight bytes.
pub fn word(i: usize) -> String {
    let mut s = String::new();
    let mut n = i;
    loop {
        s.push_str(SYLLABLES[n % 16]);
        n /= 16;
        if n == 0 {
            break;
        }
    }
    s
}

pub fn tweet_id(i: usize) -> String {
    format!("t{i:07}")
}

fn tweet_columns() -> Vec<Key> {
    let mut cols: Vec<Key> = ["user", "lang", "hashtag"].into_iter().map(Key::from).collect();
    cols.extend((1..=TWEET_WORDS).map(|i| Key::from(format!("word{i}"))));
    cols
}

/// `n` tweets with Zipf-distributed words, users and hashtags.
///
/// Exactly `min(n, PROBE_COUNT)` tweets carry [`PROBE_TAG`], spread evenly
/// through the corpus, so an exact query for it returns the same number of
/// entries at every size.
pub fn tweets(seed: u64, n: usize) -> DenseTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = Zipf::new(VOCAB as u64, 1.07).unwrap();
    let users = Zipf::new((n / 8).max(16) as u64, 0.9).unwrap();
    let tags = Zipf::new(TAGS as u64, 1.2).unwrap();
    let total: u32 = LANGS.iter().map(|l| l.1).sum();
    let stride = (n / PROBE_COUNT).max(1);
    let mut t = DenseTable::new(tweet_columns());
    for i in 0..n {
        let user = format!("u{}", users.sample(&mut rng) as u64);
        let mut pick = rng.gen_range(0..total);
        let lang = LANGS.iter().find(|l| pick < l.1 || { pick -= l.1; false }).unwrap().0;
        let probe = i % stride == 0 && i / stride < PROBE_COUNT;
        let tag = if probe {
            PROBE_TAG.to_string()
        } else if rng.gen_bool(0.4) {
            format!("#tag{}", tags.sample(&mut rng) as u64)
        } else {
            String::new()
        };
        let mut cells = vec![Key::from(user), Key::from(lang), Key::from(tag)];
        let used = rng.gen_range(3..=TWEET_WORDS);
        for j in 0..TWEET_WORDS {
            let w = if j < used { word(words.sample(&mut rng) as usize - 1) } else { String::new() };
            cells.push(Key::from(w));
        }
        t.push_row(tweet_id(i), cells).expect("generated rows are well formed");
    }
    t
}

/// A network log with `src_ip`, `srv_ip` and `bytes` columns. Sources are
/// many, servers few, so the src-by-srv graph has repeated edges.
pub fn network_log(seed: u64, rows: usize) -> DenseTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let servers: Vec<String> = (0..8).map(|i| format!("192.168.0.{}", 10 + i)).collect();
    let mut t = DenseTable::new(vec!["src_ip".into(), "srv_ip".into(), "bytes".into()]);
    for i in 0..rows {
        let src = format!("10.0.{}.{}", rng.gen_range(0..4), rng.gen_range(1..16));
        let srv = servers.choose(&mut rng).unwrap().clone();
        let bytes = if rng.gen_bool(0.9) { rng.gen_range(64..1500).to_string() } else { String::new() };
        t.push_row(format!("log{i:06}"), vec![Key::from(src), Key::from(srv), Key::from(bytes)]).unwrap();
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_distinct_and_short() {
        let all: std::collections::HashSet<String> = (0..VOCAB).map(word).collect();
        assert_eq!(all.len(), VOCAB);
        assert!(all.iter().all(|w| w.len() <= 8));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(dna_corpus(1, 1000, 10), dna_corpus(1, 1000, 10));
        assert_ne!(dna_corpus(1, 1000, 10), dna_corpus(2, 1000, 10));
        assert_eq!(tweets(5, 300), tweets(5, 300));
        assert_eq!(network_log(5, 50), network_log(5, 50));
    }

    #[test]
    fn probe_count_is_fixed() {
        for n in [10, 1000, 5000] {
            let hits = tweets(3, n).rows.iter().filter(|r| r.cells[2] == *PROBE_TAG).count();
            assert_eq!(hits, n.min(PROBE_COUNT));
        }
    }

    #[test]
    fn corpus_sizes() {
        let seqs = dna_corpus(9, 10_000, 10);
        assert_eq!(seqs.len(), 100);
        assert!(seqs.iter().all(|s| s.bases.len() == KMERS_PER_SEQUENCE + 9));
    }
}
