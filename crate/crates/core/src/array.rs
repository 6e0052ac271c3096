use std::fmt;

use crate::error::{Error, Result};
use crate::key::Key;
use crate::scalar::Scalar;
use crate::value::{Triple, Value};

/// How duplicate `(row, col)` pairs are resolved when building an array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollisionRule {
    /// Numbers add up; strings keep the last occurrence. Mixing the two is
    /// an error.
    #[default]
    Sum,
    /// The last occurrence wins regardless of type.
    LastWins,
}

/// Immutable sparse map from `(row key, col key)` to [`Value`].
///
/// Stored row-compressed over the sorted row and column key sets. Every key
/// in either set is used by at least one entry and no absent value (zero or
/// empty string) is stored, so two arrays holding the same entries are
/// structurally equal.
#[derive(Clone, PartialEq)]
pub struct AssocArray<T = f64> {
    pub(crate) rows: Vec<Key>,
    pub(crate) cols: Vec<Key>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) col_idx: Vec<usize>,
    pub(crate) vals: Vec<Value<T>>,
}

impl<T: Scalar> Default for AssocArray<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> AssocArray<T> {
    pub fn new() -> Self {
        AssocArray { rows: Vec::new(), cols: Vec::new(), row_ptr: vec![0], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple<T>>, rule: CollisionRule) -> Result<Self> {
        let mut triples: Vec<Triple<T>> = triples.into_iter().collect();
        for t in &triples {
            if t.row.is_empty() || t.col.is_empty() {
                return Err(Error::EmptyKey);
            }
            t.val.check().map_err(|reason| Error::InvalidValue { row: t.row.clone(), col: t.col.clone(), reason })?;
        }
        // Stable: later duplicates stay later.
        triples.sort_by(|a, b| (&a.row, &a.col).cmp(&(&b.row, &b.col)));

        let mut merged: Vec<Triple<T>> = Vec::with_capacity(triples.len());
        for t in triples {
            match merged.last_mut() {
                Some(last) if last.row == t.row && last.col == t.col => {
                    last.val = collide(last, t.val, rule)?;
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !t.val.is_absent());
        Ok(Self::from_sorted_unique(merged))
    }

    /// Entries must be sorted by `(row, col)`, unique, and non-absent.
    pub(crate) fn from_sorted_unique(entries: Vec<Triple<T>>) -> Self {
        let mut cols: Vec<Key> = entries.iter().map(|t| t.col.clone()).collect();
        cols.sort_unstable();
        cols.dedup();

        let mut rows = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for t in entries {
            if rows.last() != Some(&t.row) {
                if !rows.is_empty() {
                    row_ptr.push(col_idx.len());
                }
                rows.push(t.row);
            }
            col_idx.push(cols.binary_search(&t.col).expect("column collected above"));
            vals.push(t.val);
        }
        if !rows.is_empty() {
            row_ptr.push(col_idx.len());
        }
        AssocArray { rows, cols, row_ptr, col_idx, vals }
    }

    /// Builds from row-compressed parts whose rows and cols are sorted and
    /// whose column indices ascend within each row. Empty rows, unused
    /// columns and absent values are dropped.
    pub(crate) fn from_parts(
        rows: Vec<Key>,
        cols: Vec<Key>,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<Value<T>>,
    ) -> Self {
        let mut used = vec![false; cols.len()];
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut out_ptr = Vec::with_capacity(rows.len() + 1);
        out_ptr.push(0);
        let mut out_idx = Vec::with_capacity(col_idx.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        let mut vals = vals.into_iter();
        for (i, row) in rows.into_iter().enumerate() {
            let before = out_idx.len();
            for k in row_ptr[i]..row_ptr[i + 1] {
                let v = vals.next().expect("row_ptr consistent with vals");
                if !v.is_absent() {
                    used[col_idx[k]] = true;
                    out_idx.push(col_idx[k]);
                    out_vals.push(v);
                }
            }
            if out_idx.len() > before {
                out_rows.push(row);
                out_ptr.push(out_idx.len());
            }
        }
        let mut remap = vec![usize::MAX; cols.len()];
        let mut out_cols = Vec::with_capacity(cols.len());
        for (j, col) in cols.into_iter().enumerate() {
            if used[j] {
                remap[j] = out_cols.len();
                out_cols.push(col);
            }
        }
        for c in &mut out_idx {
            *c = remap[*c];
        }
        AssocArray { rows: out_rows, cols: out_cols, row_ptr: out_ptr, col_idx: out_idx, vals: out_vals }
    }

    pub fn rows(&self) -> &[Key] {
        &self.rows
    }

    pub fn cols(&self) -> &[Key] {
        &self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn get(&self, row: impl AsRef<[u8]>, col: impl AsRef<[u8]>) -> Option<&Value<T>> {
        let i = self.rows.binary_search_by(|k| k.as_bytes().cmp(row.as_ref())).ok()?;
        let j = self.cols.binary_search_by(|k| k.as_bytes().cmp(col.as_ref())).ok()?;
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        let k = self.col_idx[span.clone()].binary_search(&j).ok()?;
        Some(&self.vals[span.start + k])
    }

    /// Numeric entry, if present and numeric.
    pub fn get_num(&self, row: impl AsRef<[u8]>, col: impl AsRef<[u8]>) -> Option<T> {
        self.get(row, col).and_then(Value::as_num)
    }

    /// Entries of row `i` as `(column index, value)`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, &Value<T>)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(&self.vals[span])
    }

    /// All entries in `(row, col)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Key, &Value<T>)> + '_ {
        (0..self.rows.len()).flat_map(move |i| {
            let row = &self.rows[i];
            self.row_entries(i).map(move |(j, v)| (row, &self.cols[j], v))
        })
    }

    pub fn values(&self) -> &[Value<T>] {
        &self.vals
    }

    pub fn to_triples(&self) -> Vec<Triple<T>> {
        self.iter().map(|(r, c, v)| Triple { row: r.clone(), col: c.clone(), val: v.clone() }).collect()
    }

    pub fn max_num(&self) -> Option<T> {
        self.vals.iter().filter_map(Value::as_num).fold(None, |m, x| match m {
            Some(m) if m >= x => Some(m),
            _ => Some(x),
        })
    }

    /// Square array with `1` on the diagonal for every key in `keys`.
    pub fn identity<K: Into<Key>>(keys: impl IntoIterator<Item = K>) -> Self {
        let mut keys: Vec<Key> = keys.into_iter().map(Into::into).collect();
        keys.sort_unstable();
        keys.dedup();
        let n = keys.len();
        AssocArray {
            rows: keys.clone(),
            cols: keys,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![Value::Num(T::one()); n],
        }
    }

    /// Renames every key: `new_rows[i]` replaces `rows()[i]` and likewise for
    /// columns, then re-sorts. The renaming must be injective per axis.
    pub fn relabel(&self, new_rows: Vec<Key>, new_cols: Vec<Key>) -> Result<Self> {
        assert_eq!(new_rows.len(), self.rows.len(), "one new label per row");
        assert_eq!(new_cols.len(), self.cols.len(), "one new label per column");
        let row_order = sorted_order(&new_rows)?;
        let col_order = sorted_order(&new_cols)?;
        let mut col_pos = vec![0; new_cols.len()];
        for (pos, &old) in col_order.iter().enumerate() {
            col_pos[old] = pos;
        }

        let mut row_ptr = Vec::with_capacity(self.rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        let mut scratch: Vec<(usize, &Value<T>)> = Vec::new();
        for &old in &row_order {
            scratch.clear();
            scratch.extend(self.row_entries(old).map(|(j, v)| (col_pos[j], v)));
            scratch.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &scratch {
                col_idx.push(j);
                vals.push(v.clone());
            }
            row_ptr.push(col_idx.len());
        }
        let mut new_rows = new_rows.into_iter().map(Some).collect::<Vec<_>>();
        let mut new_cols = new_cols.into_iter().map(Some).collect::<Vec<_>>();
        let rows = row_order.iter().map(|&i| new_rows[i].take().unwrap()).collect();
        let cols = col_order.iter().map(|&j| new_cols[j].take().unwrap()).collect();
        Ok(AssocArray { rows, cols, row_ptr, col_idx, vals })
    }

    /// Applies `f` to every value. Results that are absent drop their entry.
    pub fn try_map_values<U: Scalar, E>(
        &self,
        mut f: impl FnMut(&Value<T>) -> Result<Value<U>, E>,
    ) -> Result<AssocArray<U>, E> {
        let vals = self.vals.iter().map(&mut f).collect::<Result<Vec<_>, E>>()?;
        Ok(AssocArray::from_parts(self.rows.clone(), self.cols.clone(), self.row_ptr.clone(), self.col_idx.clone(), vals))
    }

    /// Checks the structural invariants. Used by tests of the operations.
    pub fn check_invariants(&self) -> Result<(), String> {
        let strictly_sorted = |v: &[Key]| v.windows(2).all(|w| w[0] < w[1]);
        if !strictly_sorted(&self.rows) || !strictly_sorted(&self.cols) {
            return Err("keys not strictly sorted".into());
        }
        if self.row_ptr.len() != self.rows.len() + 1 || *self.row_ptr.last().unwrap() != self.vals.len() {
            return Err("row pointer length mismatch".into());
        }
        let mut used = vec![false; self.cols.len()];
        for i in 0..self.rows.len() {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            if span.is_empty() {
                return Err(format!("phantom row {}", self.rows[i]));
            }
            let idx = &self.col_idx[span];
            if !idx.windows(2).all(|w| w[0] < w[1]) {
                return Err(format!("row {} columns not ascending", self.rows[i]));
            }
            for &j in idx {
                used[j] = true;
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(format!("phantom column {}", self.cols[j]));
        }
        for v in &self.vals {
            if v.is_absent() {
                return Err("absent value stored".into());
            }
            v.check()?;
        }
        if self.rows.iter().chain(&self.cols).any(Key::is_empty) {
            return Err("empty key".into());
        }
        Ok(())
    }
}

fn collide<T: Scalar>(old: &Triple<T>, new: Value<T>, rule: CollisionRule) -> Result<Value<T>> {
    match (rule, &old.val, new) {
        (CollisionRule::LastWins, _, new) => Ok(new),
        (CollisionRule::Sum, Value::Num(a), Value::Num(b)) => {
            let s = *a + b;
            if !s.is_storable() {
                return Err(Error::InvalidValue { row: old.row.clone(), col: old.col.clone(), reason: format!("sum {s} overflows") });
            }
            Ok(Value::Num(s))
        }
        (CollisionRule::Sum, Value::Str(_), new @ Value::Str(_)) => Ok(new),
        _ => Err(Error::MixedTypeCollision { row: old.row.clone(), col: old.col.clone() }),
    }
}

fn sorted_order(keys: &[Key]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_unstable_by(|&a, &b| keys[a].cmp(&keys[b]));
    if let Some(w) = order.windows(2).find(|w| keys[w[0]] == keys[w[1]]) {
        return Err(Error::DuplicateKey(keys[w[0]].clone()));
    }
    Ok(order)
}

impl<T: Scalar> fmt::Debug for AssocArray<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AssocArray[{}x{}, nnz={}]", self.nrows(), self.ncols(), self.nnz())?;
        let mut m = f.debug_list();
        for (r, c, v) in self.iter().take(64) {
            m.entry(&(r, c, v));
        }
        m.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Assoc;

    fn t(r: &str, c: &str, v: f64) -> Triple {
        Triple::new(r, c, v)
    }

    #[test]
    fn single_numeric_entry() {
        let a = Assoc::from_triples([t("alice", "bob", 47.0)], CollisionRule::Sum).unwrap();
        assert_eq!(a.get_num("alice", "bob"), Some(47.0));
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (1, 1, 1));
    }

    #[test]
    fn empty_input_gives_empty_array() {
        let a = Assoc::from_triples(Vec::new(), CollisionRule::Sum).unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (0, 0, 0));
        assert_eq!(a, Assoc::new());
        a.check_invariants().unwrap();
    }

    #[test]
    fn duplicates_sum() {
        let a = Assoc::from_triples([t("r", "c", 1.0), t("r", "c", 2.0)], CollisionRule::Sum).unwrap();
        assert_eq!(a.get_num("r", "c"), Some(3.0));
    }

    #[test]
    fn duplicates_cancelling_to_zero_leave_no_keys() {
        let a = Assoc::from_triples([t("r", "c", 1.0), t("r", "c", -1.0), t("s", "d", 2.0)], CollisionRule::Sum).unwrap();
        assert_eq!(a.rows(), &[Key::from("s")]);
        assert_eq!(a.cols(), &[Key::from("d")]);
        a.check_invariants().unwrap();
    }

    #[test]
    fn strings_last_wins_and_mixing_fails() {
        let a = Assoc::from_triples(
            [Triple::new("r", "c", "first"), Triple::new("r", "c", "second")],
            CollisionRule::Sum,
        )
        .unwrap();
        assert_eq!(a.get("r", "c"), Some(&Value::str("second")));

        let err = Assoc::from_triples([t("r", "c", 1.0), Triple::new("r", "c", "x")], CollisionRule::Sum).unwrap_err();
        assert!(matches!(err, Error::MixedTypeCollision { .. }));

        let last = Assoc::from_triples([t("r", "c", 1.0), Triple::new("r", "c", "x")], CollisionRule::LastWins).unwrap();
        assert_eq!(last.get("r", "c"), Some(&Value::str("x")));
    }

    #[test]
    fn explicit_zero_and_empty_string_are_absent() {
        let a = Assoc::from_triples([t("r", "c", 0.0), Triple::new("r", "d", "")], CollisionRule::Sum).unwrap();
        assert!(a.is_empty());
        assert_eq!(a.nrows(), 0);
    }

    #[test]
    fn rejects_empty_keys_and_nan() {
        assert_eq!(Assoc::from_triples([t("", "c", 1.0)], CollisionRule::Sum), Err(Error::EmptyKey));
        assert!(matches!(
            Assoc::from_triples([t("r", "c", f64::NAN)], CollisionRule::Sum),
            Err(Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn to_triples_is_sorted() {
        let a = Assoc::from_triples([t("b", "x", 2.0), t("a", "y", 1.0)], CollisionRule::Sum).unwrap();
        let got: Vec<_> = a.to_triples();
        assert_eq!(got, vec![t("a", "y", 1.0), t("b", "x", 2.0)]);

        let s = Assoc::from_triples([Triple::new("alice", "bob", "cited")], CollisionRule::Sum).unwrap();
        assert_eq!(s.to_triples(), vec![Triple::new("alice", "bob", "cited")]);
        assert!(Assoc::new().to_triples().is_empty());
    }

    #[test]
    fn relabel_resorts_and_detects_collisions() {
        let a = Assoc::from_triples([t("a", "x", 1.0), t("b", "y", 2.0)], CollisionRule::Sum).unwrap();
        let r = a.relabel(vec!["z".into(), "m".into()], vec!["q".into(), "p".into()]).unwrap();
        r.check_invariants().unwrap();
        assert_eq!(r.get_num("z", "q"), Some(1.0));
        assert_eq!(r.get_num("m", "p"), Some(2.0));
        assert_eq!(r.rows()[0], "m");
        assert!(matches!(a.relabel(vec!["z".into(), "z".into()], a.cols().to_vec()), Err(Error::DuplicateKey(_))));
    }
}
