use std::collections::{BTreeMap, BTreeSet};

use cmd_core::{Key, KeyEncoding, KeySpec};

use crate::error::Result;
use crate::log::Record;

#[derive(Clone, Debug)]
pub(crate) struct Cell {
    pub seq: u64,
    pub token: Box<[u8]>,
}

/// Latest value per (row, col), plus a column-to-rows index so that column
/// lookups do not scan rows.
#[derive(Debug, Default)]
pub(crate) struct Index {
    pub rows: BTreeMap<Key, BTreeMap<Key, Cell>>,
    pub cols: BTreeMap<Key, BTreeSet<Key>>,
    pub entries: usize,
    pub records: usize,
    pub next_seq: u64,
}

impl Index {
    pub fn apply(&mut self, r: Record) {
        self.records += 1;
        self.next_seq = self.next_seq.max(r.seq + 1);
        let cells = self.rows.entry(r.row.clone()).or_default();
        match cells.get_mut(&r.col) {
            Some(cell) if cell.seq > r.seq => {}
            Some(cell) => *cell = Cell { seq: r.seq, token: r.token },
            None => {
                cells.insert(r.col.clone(), Cell { seq: r.seq, token: r.token });
                self.cols.entry(r.col).or_default().insert(r.row);
                self.entries += 1;
            }
        }
    }
}

/// Entries of `map` whose key satisfies `spec`.
pub(crate) fn matching<'a, V>(map: &'a BTreeMap<Key, V>, spec: &KeySpec, enc: KeyEncoding) -> Result<Vec<(&'a Key, &'a V)>> {
    spec.validate(enc)?;
    Ok(match (spec, enc) {
        (KeySpec::All, _) => map.iter().collect(),
        (KeySpec::Exact(list), _) => {
            let wanted: BTreeSet<&Key> = list.iter().collect();
            wanted.into_iter().filter_map(|k| map.get_key_value(k)).collect()
        }
        (KeySpec::Prefix(p), KeyEncoding::Raw) => map.range(p.clone()..).take_while(|(k, _)| k.starts_with(p.as_bytes())).collect(),
        (KeySpec::Range(a, b), KeyEncoding::Raw) => map.range(a.clone()..=b.clone()).collect(),
        // Base64 text order is not the decoded byte order.
        (_, KeyEncoding::Base64) => {
            let mut out = Vec::new();
            for (k, v) in map {
                if spec.matches(k, enc)? {
                    out.push((k, v));
                }
            }
            out
        }
    })
}
