//! Dense records to exploded sparse columns.
//!
//! Each non-empty cell `(row, column, cell)` becomes the entry
//! `(row, column ∥ delimiter ∥ cell) = 1`, so record content lives in the
//! keys and the values are structural ones.

use std::collections::{BTreeMap, HashSet};

use crate::array::{AssocArray, CollisionRule};
use crate::error::{Error, Result};
use crate::key::Key;
use crate::scalar::Scalar;
use crate::value::{Triple, Value};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DenseTable {
    pub columns: Vec<Key>,
    pub rows: Vec<DenseRow>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseRow {
    pub id: Key,
    /// Aligned with [`DenseTable::columns`]; empty means no value.
    pub cells: Vec<Key>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExplodeConfig {
    pub delimiter: u8,
}

impl Default for ExplodeConfig {
    fn default() -> Self {
        ExplodeConfig { delimiter: b'|' }
    }
}

impl DenseTable {
    pub fn new(columns: Vec<Key>) -> Self {
        DenseTable { columns, rows: Vec::new() }
    }

    pub fn push_row(&mut self, id: impl Into<Key>, cells: Vec<Key>) -> Result<()> {
        let id = id.into();
        if cells.len() != self.columns.len() {
            return Err(Error::RaggedRow { record: self.rows.len() + 1, got: cells.len(), expected: self.columns.len() });
        }
        if self.rows.iter().any(|r| r.id == id) {
            return Err(Error::DuplicateRowId(id));
        }
        self.rows.push(DenseRow { id, cells });
        Ok(())
    }

    pub fn non_empty_cells(&self) -> usize {
        self.rows.iter().flat_map(|r| &r.cells).filter(|c| !c.is_empty()).count()
    }

    /// Columns and rows sorted by key, rows with no values removed. This is
    /// the form [`unexplode`] reconstructs.
    pub fn canonical(&self) -> DenseTable {
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by(|&a, &b| self.columns[a].cmp(&self.columns[b]));
        let columns = order.iter().map(|&j| self.columns[j].clone()).collect();
        let mut rows: Vec<DenseRow> = self
            .rows
            .iter()
            .filter(|r| r.cells.iter().any(|c| !c.is_empty()))
            .map(|r| DenseRow { id: r.id.clone(), cells: order.iter().map(|&j| r.cells[j].clone()).collect() })
            .collect();
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        DenseTable { columns, rows }
    }
}

/// Parses comma-separated text whose first field is the row id.
///
/// Without a header, value columns are named `c1`, `c2`, ...
pub fn parse_dense(csv_text: &[u8], has_header: bool) -> Result<DenseTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(csv_text);
    let mut records = reader.byte_records();
    let mut table: Option<DenseTable> = None;

    if has_header {
        match records.next() {
            Some(header) => {
                let header = header.map_err(|e| Error::Csv(e.to_string()))?;
                table = Some(DenseTable::new(header.iter().skip(1).map(Key::from).collect()));
            }
            None => return Ok(DenseTable::default()),
        }
    }
    for (n, record) in records.enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let t = table.get_or_insert_with(|| {
            DenseTable::new((1..record.len()).map(|j| Key::from(format!("c{j}"))).collect())
        });
        let expected = t.columns.len() + 1;
        if record.len() != expected {
            return Err(Error::RaggedRow { record: n + 1, got: record.len(), expected });
        }
        let id = Key::from(&record[0]);
        if id.is_empty() {
            return Err(Error::EmptyKey);
        }
        let cells = record.iter().skip(1).map(Key::from).collect();
        t.push_row(id, cells).map_err(|e| match e {
            Error::RaggedRow { got, expected, .. } => Error::RaggedRow { record: n + 1, got, expected },
            other => other,
        })?;
    }
    Ok(table.unwrap_or_default())
}

pub fn explode<T: Scalar>(t: &DenseTable, cfg: ExplodeConfig) -> Result<AssocArray<T>> {
    if let Some(c) = t.columns.iter().find(|c| c.as_bytes().contains(&cfg.delimiter)) {
        return Err(Error::DelimiterClash { delimiter: cfg.delimiter as char, column: c.clone() });
    }
    let mut triples = Vec::with_capacity(t.non_empty_cells());
    for row in &t.rows {
        for (name, cell) in t.columns.iter().zip(&row.cells) {
            if cell.is_empty() {
                continue;
            }
            let mut col = Vec::with_capacity(name.len() + 1 + cell.len());
            col.extend_from_slice(name.as_bytes());
            col.push(cfg.delimiter);
            col.extend_from_slice(cell.as_bytes());
            triples.push(Triple { row: row.id.clone(), col: col.into(), val: Value::Num(T::one()) });
        }
    }
    AssocArray::from_triples(triples, CollisionRule::Sum)
}

/// Splits every column key at its first delimiter back into a dense column
/// name and a cell value.
pub fn unexplode<T: Scalar>(a: &AssocArray<T>, cfg: ExplodeConfig) -> Result<DenseTable> {
    let mut split = Vec::with_capacity(a.ncols());
    let mut names = BTreeMap::new();
    for col in a.cols() {
        let at = col.as_bytes().iter().position(|&b| b == cfg.delimiter).ok_or_else(|| Error::MalformedColumn(col.clone()))?;
        let name = Key::from(&col.as_bytes()[..at]);
        let cell = Key::from(&col.as_bytes()[at + 1..]);
        let next = names.len();
        names.entry(name.clone()).or_insert(next);
        split.push((name, cell));
    }
    let columns: Vec<Key> = names.keys().cloned().collect();
    let slot: BTreeMap<&Key, usize> = columns.iter().enumerate().map(|(i, k)| (k, i)).collect();

    let mut rows = Vec::with_capacity(a.nrows());
    for (i, id) in a.rows().iter().enumerate() {
        let mut cells = vec![Key::from(""); columns.len()];
        let mut filled = HashSet::new();
        for (j, _) in a.row_entries(i) {
            let (name, cell) = &split[j];
            let s = slot[name];
            if !filled.insert(s) {
                return Err(Error::MultiValueCell { row: id.clone(), column: name.clone() });
            }
            cells[s] = cell.clone();
        }
        rows.push(DenseRow { id: id.clone(), cells });
    }
    Ok(DenseTable { columns, rows })
}
