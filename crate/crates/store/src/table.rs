use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use cmd_core::{text, AssocArray, CollisionRule, KeyEncoding, KeySpec, Scalar, Triple};
use cmd_mask::{axis_encoding, file as mask_file, MaskPolicy, MaskedArray, Salt};

use crate::error::{Result, StoreError};
use crate::index::{matching, Index};
use crate::lock::WriterLock;
use crate::log::{self, Record};

/// Salt and policy of a table created by a masked put.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableMeta {
    pub salt: Salt,
    pub policy: MaskPolicy,
}

impl TableMeta {
    fn to_bytes(self) -> Vec<u8> {
        mask_file::header_bytes(self.salt, self.policy)
    }

    fn parse(text: &str) -> Result<Self> {
        let mut salt = None;
        let mut policy = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match line.split_once('=') {
                Some(("salt", v)) => salt = Some(Salt::from_hex(v.trim())?),
                Some(("policy", v)) => policy = Some(MaskPolicy::from_header(v.trim())?),
                _ => return Err(StoreError::MetaMismatch(format!("unrecognised metadata line {line:?}"))),
            }
        }
        match (salt, policy) {
            (Some(salt), Some(policy)) => Ok(TableMeta { salt, policy }),
            _ => Err(StoreError::MetaMismatch("metadata needs salt= and policy= lines".into())),
        }
    }
}

struct Writer {
    file: File,
    _lock: WriterLock,
}

/// A named table in a store directory.
///
/// Files: `<name>.cmdt` (the log), `<name>.meta` (masked tables only) and
/// `<name>.lock`. The writer lock is taken on the first write and held until
/// the handle is dropped; a second writer on the same table gets
/// [`StoreError::Locked`]. Readers need no lock. A handle sees what was on
/// disk when it was opened plus its own writes.
pub struct Table {
    name: String,
    dir: PathBuf,
    index: RwLock<Index>,
    meta: RwLock<Option<TableMeta>>,
    writer: Mutex<Option<Writer>>,
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidName(name.to_string()))
    }
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}

impl Table {
    pub fn log_path(dir: &Path, name: &str) -> PathBuf {
        dir.join(format!("{name}.cmdt"))
    }

    fn meta_path(&self) -> PathBuf {
        self.dir.join(format!("{}.meta", self.name))
    }

    pub fn path(&self) -> PathBuf {
        Self::log_path(&self.dir, &self.name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn exists(dir: &Path, name: &str) -> bool {
        Self::log_path(dir, name).exists()
    }

    pub fn open(dir: impl AsRef<Path>, name: &str, create: bool) -> Result<Self> {
        check_name(name)?;
        let dir = dir.as_ref().to_path_buf();
        let path = Self::log_path(&dir, name);
        if !path.exists() {
            if !create {
                return Err(StoreError::NotFound(path));
            }
            fs::create_dir_all(&dir)?;
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    f.write_all(&log::header())?;
                    f.sync_all()?;
                    sync_dir(&dir)?;
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {}
                Err(e) => return Err(e.into()),
            }
        }
        let bytes = fs::read(&path)?;
        let replay = log::replay(&bytes);
        if let Some(reason) = replay.error {
            return Err(StoreError::Corrupt { path, offset: replay.good_len, recovered: replay.records.len(), reason });
        }
        let mut index = Index::default();
        for r in replay.records {
            index.apply(r);
        }
        let table = Table {
            name: name.to_string(),
            dir,
            index: RwLock::new(index),
            meta: RwLock::new(None),
            writer: Mutex::new(None),
        };
        let meta_path = table.meta_path();
        if meta_path.exists() {
            *table.meta.write().unwrap() = Some(TableMeta::parse(&fs::read_to_string(meta_path)?)?);
        }
        Ok(table)
    }

    /// Truncates a damaged log to its intact prefix and returns how many
    /// records survived.
    pub fn repair(dir: impl AsRef<Path>, name: &str) -> Result<usize> {
        check_name(name)?;
        let dir = dir.as_ref();
        let path = Self::log_path(dir, name);
        if !path.exists() {
            return Err(StoreError::NotFound(path));
        }
        let _lock = WriterLock::acquire(&dir.join(format!("{name}.lock")), &path)?;
        let bytes = fs::read(&path)?;
        let replay = log::replay(&bytes);
        let f = OpenOptions::new().write(true).open(&path)?;
        if replay.good_len < log::HEADER_LEN as u64 {
            f.set_len(0)?;
            (&f).write_all(&log::header())?;
        } else {
            f.set_len(replay.good_len)?;
        }
        f.sync_all()?;
        Ok(replay.records.len())
    }

    pub fn meta(&self) -> Option<TableMeta> {
        *self.meta.read().unwrap()
    }

    /// Number of distinct (row, col) entries.
    pub fn len(&self) -> usize {
        self.index.read().unwrap().entries
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of records in the log, including superseded ones.
    pub fn record_count(&self) -> usize {
        self.index.read().unwrap().records
    }

    pub fn file_len(&self) -> Result<u64> {
        Ok(fs::metadata(self.path())?.len())
    }

    fn with_writer<R>(&self, f: impl FnOnce(&mut Writer) -> Result<R>) -> Result<R> {
        let mut guard = self.writer.lock().unwrap();
        if guard.is_none() {
            let lock = WriterLock::acquire(&self.dir.join(format!("{}.lock", self.name)), &self.path())?;
            let file = OpenOptions::new().append(true).open(self.path())?;
            *guard = Some(Writer { file, _lock: lock });
        }
        f(guard.as_mut().unwrap())
    }

    fn append<T: Scalar>(&self, w: &mut Writer, a: &AssocArray<T>) -> Result<usize> {
        if a.is_empty() {
            return Ok(0);
        }
        let first = self.index.read().unwrap().next_seq;
        let mut buf = Vec::with_capacity(a.nnz() * 48);
        let mut records = Vec::with_capacity(a.nnz());
        let mut token = Vec::new();
        for (seq, (row, col, val)) in (first..).zip(a.iter()) {
            token.clear();
            text::encode_value(&mut token, val);
            log::encode_record(&mut buf, seq, row.as_bytes(), col.as_bytes(), &token);
            records.push(Record { seq, row: row.clone(), col: col.clone(), token: token.as_slice().into() });
        }
        w.file.write_all(&buf)?;
        w.file.sync_data()?;
        let mut index = self.index.write().unwrap();
        for r in records {
            index.apply(r);
        }
        Ok(a.nnz())
    }

    /// Appends every entry of `a` durably. Later writes to the same
    /// (row, col) win.
    pub fn put<T: Scalar>(&self, a: &AssocArray<T>) -> Result<usize> {
        self.with_writer(|w| {
            if self.meta().is_some() {
                return Err(StoreError::MetaMismatch(format!("table {} holds masked data; use a masked put", self.name)));
            }
            self.append(w, a)
        })
    }

    /// Appends a masked array. The first masked put into an empty table
    /// records its salt and policy; later ones must match.
    pub fn put_masked<T: Scalar>(&self, m: &MaskedArray<T>) -> Result<usize> {
        let incoming = TableMeta { salt: m.salt, policy: m.policy };
        self.with_writer(|w| {
            match self.meta() {
                Some(meta) if meta == incoming => {}
                Some(meta) => {
                    return Err(StoreError::MetaMismatch(format!(
                        "table {} was masked with salt {} and policy {}; got salt {} and policy {}",
                        self.name,
                        meta.salt.to_hex(),
                        meta.policy.header(),
                        incoming.salt.to_hex(),
                        incoming.policy.header()
                    )))
                }
                None if !self.is_empty() => {
                    return Err(StoreError::MetaMismatch(format!("table {} already holds plain data", self.name)))
                }
                None => {
                    let tmp = self.dir.join(format!("{}.meta.tmp", self.name));
                    let mut f = File::create(&tmp)?;
                    f.write_all(&incoming.to_bytes())?;
                    f.sync_all()?;
                    fs::rename(&tmp, self.meta_path())?;
                    sync_dir(&self.dir)?;
                    *self.meta.write().unwrap() = Some(incoming);
                }
            }
            self.append(w, &m.payload)
        })
    }

    fn encodings(&self) -> (KeyEncoding, KeyEncoding) {
        match self.meta() {
            Some(m) => (axis_encoding(m.policy.rows), axis_encoding(m.policy.cols)),
            None => (KeyEncoding::Raw, KeyEncoding::Raw),
        }
    }

    /// Entries matching both specs. On masked tables the specs must hold
    /// masked keys; ranges on OPE axes compare decoded ciphertext bytes.
    pub fn query<T: Scalar>(&self, rows: &KeySpec, cols: &KeySpec) -> Result<AssocArray<T>> {
        let (row_enc, col_enc) = self.encodings();
        let index = self.index.read().unwrap();
        let mut triples = Vec::new();
        let mut push = |row: &cmd_core::Key, col: &cmd_core::Key, token: &[u8]| -> Result<()> {
            let val = text::decode_value(token).map_err(StoreError::BadValue)?;
            triples.push(Triple { row: row.clone(), col: col.clone(), val });
            Ok(())
        };
        if rows.is_all() && !cols.is_all() {
            for (col, row_keys) in matching(&index.cols, cols, col_enc)? {
                for row in row_keys {
                    push(row, col, &index.rows[row][col].token)?;
                }
            }
        } else {
            for (row, cells) in matching(&index.rows, rows, row_enc)? {
                for (col, cell) in matching(cells, cols, col_enc)? {
                    push(row, col, &cell.token)?;
                }
            }
        }
        drop(index);
        Ok(AssocArray::from_triples(triples, CollisionRule::LastWins)?)
    }

    /// Like [`Table::query`], wrapping the result with the table's salt and
    /// policy so it can be unmasked.
    pub fn query_masked<T: Scalar>(&self, rows: &KeySpec, cols: &KeySpec) -> Result<MaskedArray<T>> {
        let meta = self
            .meta()
            .ok_or_else(|| StoreError::MetaMismatch(format!("table {} holds plain data", self.name)))?;
        Ok(MaskedArray { payload: self.query(rows, cols)?, policy: meta.policy, salt: meta.salt })
    }

    pub fn scan<T: Scalar>(&self) -> Result<AssocArray<T>> {
        self.query(&KeySpec::All, &KeySpec::All)
    }

    /// Rewrites the log with one record per live entry, sorted by key.
    pub fn compact(&self) -> Result<()> {
        self.with_writer(|w| {
            let index = self.index.read().unwrap();
            let mut buf = log::header().to_vec();
            for (row, cells) in &index.rows {
                for (col, cell) in cells {
                    log::encode_record(&mut buf, cell.seq, row.as_bytes(), col.as_bytes(), &cell.token);
                }
            }
            let tmp = self.dir.join(format!("{}.cmdt.tmp", self.name));
            let mut f = File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
            fs::rename(&tmp, self.path())?;
            sync_dir(&self.dir)?;
            w.file = OpenOptions::new().append(true).open(self.path())?;
            let live = index.entries;
            drop(index);
            self.index.write().unwrap().records = live;
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_checked() {
        for bad in ["", ".hidden", "a/b", "a b", "../x"] {
            assert!(matches!(check_name(bad), Err(StoreError::InvalidName(_))), "{bad}");
        }
        for good in ["T", "tweets.main", "x_1-2"] {
            check_name(good).unwrap();
        }
    }

    #[test]
    fn meta_round_trip() {
        let meta = TableMeta { salt: Salt([3; 16]), policy: MaskPolicy::default() };
        let text = String::from_utf8(meta.to_bytes()).unwrap();
        assert_eq!(TableMeta::parse(&text).unwrap(), meta);
        assert!(TableMeta::parse("salt=00").is_err());
    }
}
