use std::cmp::Ordering;

use rayon::prelude::*;

use crate::array::AssocArray;
use crate::error::{Error, Result};
use crate::key::Key;
use crate::scalar::{self, Scalar};
use crate::spec::{KeyEncoding, KeySpec};
use crate::value::Value;

/// Element-wise operator for [`AssocArray::combine`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CombineOp {
    /// `A + B`: union, missing side contributes zero.
    Add,
    /// `A - B`: union, missing side contributes zero.
    Sub,
    /// `A & B`: intersection, keeping the smaller value.
    Min,
    /// `A | B`: union, keeping the larger value where both exist.
    Max,
}

/// Rows below this count are multiplied on the calling thread.
const PAR_MIN_ROWS: usize = 256;

impl<T: Scalar> AssocArray<T> {
    /// Sub-array of entries whose row matches `rows` and column matches `cols`.
    pub fn select(&self, rows: &KeySpec, cols: &KeySpec) -> Result<Self> {
        self.select_encoded(rows, cols, KeyEncoding::Raw, KeyEncoding::Raw)
    }

    /// [`select`](Self::select) with prefix/range comparisons made on keys
    /// decoded per axis.
    pub fn select_encoded(&self, rows: &KeySpec, cols: &KeySpec, row_enc: KeyEncoding, col_enc: KeyEncoding) -> Result<Self> {
        let row_idx = rows.select_indices(&self.rows, row_enc)?;
        let col_keep: Option<Vec<bool>> = if cols.is_all() {
            cols.validate(col_enc)?;
            None
        } else {
            let mut keep = vec![false; self.cols.len()];
            for j in cols.select_indices(&self.cols, col_enc)? {
                keep[j] = true;
            }
            Some(keep)
        };

        let mut out_rows = Vec::with_capacity(row_idx.len());
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in row_idx {
            for (j, v) in self.row_entries(i) {
                if col_keep.as_ref().map_or(true, |keep| keep[j]) {
                    col_idx.push(j);
                    vals.push(v.clone());
                }
            }
            out_rows.push(self.rows[i].clone());
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts(out_rows, self.cols.clone(), row_ptr, col_idx, vals))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols.len() + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols.len() {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut slots: Vec<Option<Value<T>>> = vec![None; self.nnz()];
        for i in 0..self.rows.len() {
            for (j, v) in self.row_entries(i) {
                let k = next[j];
                next[j] += 1;
                col_idx[k] = i;
                slots[k] = Some(v.clone());
            }
        }
        AssocArray {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            row_ptr,
            col_idx,
            vals: slots.into_iter().map(|v| v.expect("every slot filled")).collect(),
        }
    }

    /// Keeps entries strictly greater than `cut`.
    pub fn threshold(&self, cut: T) -> Result<Self> {
        let mut vals = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            match v {
                Value::Num(x) if *x > cut => vals.push(Value::Num(*x)),
                Value::Num(_) => vals.push(Value::Num(T::zero())),
                Value::Str(_) => return Err(Error::TypeMismatch { row: r.clone(), col: c.clone() }),
            }
        }
        Ok(Self::from_parts(self.rows.clone(), self.cols.clone(), self.row_ptr.clone(), self.col_idx.clone(), vals))
    }

    pub fn combine(&self, other: &Self, op: CombineOp) -> Result<Self> {
        let (cols, left_map, right_map) = merge_keys(&self.cols, &other.cols);
        let mut rows = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();

        let (mut i, mut k) = (0, 0);
        while i < self.rows.len() || k < other.rows.len() {
            let ord = match (self.rows.get(i), other.rows.get(k)) {
                (Some(a), Some(b)) => a.cmp(b),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            let left: Vec<(usize, &Value<T>)> = if ord != Ordering::Greater {
                self.row_entries(i).map(|(j, v)| (left_map[j], v)).collect()
            } else {
                Vec::new()
            };
            let right: Vec<(usize, &Value<T>)> = if ord != Ordering::Less {
                other.row_entries(k).map(|(j, v)| (right_map[j], v)).collect()
            } else {
                Vec::new()
            };
            let row = if ord == Ordering::Greater { &other.rows[k] } else { &self.rows[i] };
            merge_row(row, &cols, &left, &right, op, &mut col_idx, &mut vals)?;
            rows.push(row.clone());
            row_ptr.push(col_idx.len());
            if ord != Ordering::Greater {
                i += 1;
            }
            if ord != Ordering::Less {
                k += 1;
            }
        }
        Ok(Self::from_parts(rows, cols, row_ptr, col_idx, vals))
    }

    /// Sparse product over `(+, ×)`. The inner dimension pairs `self`'s
    /// columns with `other`'s rows by key; strings count as one.
    ///
    /// Rows are computed independently (in parallel on large inputs), and
    /// each row accumulates in a fixed order, so the result does not depend
    /// on the thread count.
    pub fn multiply(&self, other: &Self) -> Self {
        let link = link_keys(&self.cols, &other.rows);
        let ncols = other.cols.len();
        let row_product = |acc: &mut Accumulator<T>, i: usize| acc.row(self, other, &link, i);

        let per_row: Vec<(Vec<usize>, Vec<T>)> = if self.rows.len() >= PAR_MIN_ROWS && rayon::current_num_threads() > 1 {
            (0..self.rows.len())
                .into_par_iter()
                .with_min_len(64)
                .map_init(|| Accumulator::new(ncols), row_product)
                .collect()
        } else {
            let mut acc = Accumulator::new(ncols);
            (0..self.rows.len()).map(|i| row_product(&mut acc, i)).collect()
        };

        let mut row_ptr = Vec::with_capacity(self.rows.len() + 1);
        row_ptr.push(0);
        let nnz = per_row.iter().map(|r| r.0.len()).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for (idx, v) in per_row {
            col_idx.extend(idx);
            vals.extend(v.into_iter().map(Value::Num));
            row_ptr.push(col_idx.len());
        }
        Self::from_parts(self.rows.clone(), other.cols.clone(), row_ptr, col_idx, vals)
    }
}

struct Accumulator<T> {
    sums: Vec<T>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl<T: Scalar> Accumulator<T> {
    fn new(n: usize) -> Self {
        Accumulator { sums: vec![T::zero(); n], seen: vec![false; n], touched: Vec::new() }
    }

    fn row(&mut self, a: &AssocArray<T>, b: &AssocArray<T>, link: &[Option<usize>], i: usize) -> (Vec<usize>, Vec<T>) {
        for (c, av) in a.row_entries(i) {
            let Some(r) = link[c] else { continue };
            let x = av.coerce();
            for (j, bv) in b.row_entries(r) {
                let p = x * bv.coerce();
                if self.seen[j] {
                    self.sums[j] = self.sums[j] + p;
                } else {
                    self.seen[j] = true;
                    self.sums[j] = p;
                    self.touched.push(j);
                }
            }
        }
        self.touched.sort_unstable();
        let mut idx = Vec::with_capacity(self.touched.len());
        let mut vals = Vec::with_capacity(self.touched.len());
        for &j in &self.touched {
            self.seen[j] = false;
            if !self.sums[j].is_zero() {
                idx.push(j);
                vals.push(self.sums[j]);
            }
        }
        self.touched.clear();
        (idx, vals)
    }
}

/// For each key in `left`, its position in `right` if present.
fn link_keys(left: &[Key], right: &[Key]) -> Vec<Option<usize>> {
    let mut out = vec![None; left.len()];
    let (mut i, mut k) = (0, 0);
    while i < left.len() && k < right.len() {
        match left[i].cmp(&right[k]) {
            Ordering::Less => i += 1,
            Ordering::Greater => k += 1,
            Ordering::Equal => {
                out[i] = Some(k);
                i += 1;
                k += 1;
            }
        }
    }
    out
}

/// Sorted union of two sorted key lists with each side's index mapping.
fn merge_keys(a: &[Key], b: &[Key]) -> (Vec<Key>, Vec<usize>, Vec<usize>) {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut am = Vec::with_capacity(a.len());
    let mut bm = Vec::with_capacity(b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let ord = match (a.get(i), b.get(k)) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        let key = if ord == Ordering::Greater { &b[k] } else { &a[i] };
        if ord != Ordering::Greater {
            am.push(out.len());
            i += 1;
        }
        if ord != Ordering::Less {
            bm.push(out.len());
            k += 1;
        }
        out.push(key.clone());
    }
    (out, am, bm)
}

fn merge_row<T: Scalar>(
    row: &Key,
    cols: &[Key],
    left: &[(usize, &Value<T>)],
    right: &[(usize, &Value<T>)],
    op: CombineOp,
    col_idx: &mut Vec<usize>,
    vals: &mut Vec<Value<T>>,
) -> Result<()> {
    let mismatch = |j: usize| Error::TypeMismatch { row: row.clone(), col: cols[j].clone() };
    let (mut i, mut k) = (0, 0);
    while i < left.len() || k < right.len() {
        let ord = match (left.get(i), right.get(k)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        let (j, v) = match ord {
            Ordering::Equal => {
                let (j, a) = left[i];
                let b = right[k].1;
                i += 1;
                k += 1;
                let (Value::Num(x), Value::Num(y)) = (a, b) else { return Err(mismatch(j)) };
                let v = match op {
                    CombineOp::Add => *x + *y,
                    CombineOp::Sub => *x - *y,
                    CombineOp::Min => scalar::min(*x, *y),
                    CombineOp::Max => scalar::max(*x, *y),
                };
                if !v.is_storable() {
                    return Err(Error::InvalidValue { row: row.clone(), col: cols[j].clone(), reason: format!("result {v} overflows") });
                }
                (j, Value::Num(v))
            }
            Ordering::Less => {
                let (j, a) = left[i];
                i += 1;
                if op == CombineOp::Min {
                    continue;
                }
                (j, a.clone())
            }
            Ordering::Greater => {
                let (j, b) = right[k];
                k += 1;
                match (op, b) {
                    (CombineOp::Min, _) => continue,
                    (CombineOp::Sub, Value::Num(y)) => (j, Value::Num(T::zero() - *y)),
                    (CombineOp::Sub, Value::Str(_)) => return Err(mismatch(j)),
                    _ => (j, b.clone()),
                }
            }
        };
        col_idx.push(j);
        vals.push(v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Assoc, CollisionRule, Triple};

    fn arr(entries: &[(&str, &str, f64)]) -> Assoc {
        Assoc::from_triples(entries.iter().map(|&(r, c, v)| Triple::new(r, c, v)), CollisionRule::Sum).unwrap()
    }

    /// The alice/bob/carl graph: alice cites bob and carl, bob cites carl.
    fn citations() -> Assoc {
        arr(&[("alice", "bob", 1.0), ("alice", "carl", 1.0), ("bob", "alice", 1.0), ("carl", "alice", 1.0), ("carl", "bob", 1.0)])
    }

    #[test]
    fn select_row_forms() {
        let a = citations();
        let alice = a.select(&KeySpec::exact(["alice"]), &KeySpec::All).unwrap();
        assert_eq!(alice, arr(&[("alice", "bob", 1.0), ("alice", "carl", 1.0)]));
        let al = a.select(&KeySpec::prefix("al"), &KeySpec::All).unwrap();
        assert_eq!(al, alice);
        let ab = a.select(&KeySpec::range("alice", "bob").unwrap(), &KeySpec::All).unwrap();
        assert_eq!(ab.rows(), &[Key::from("alice"), Key::from("bob")]);
        assert_eq!(ab.nnz(), 3);
        ab.check_invariants().unwrap();
    }

    #[test]
    fn select_drops_phantom_keys_and_composes() {
        let a = citations();
        let s = a.select(&KeySpec::All, &KeySpec::exact(["alice"])).unwrap();
        assert_eq!(s.rows(), &[Key::from("bob"), Key::from("carl")]);
        assert_eq!(s.cols(), &[Key::from("alice")]);
        s.check_invariants().unwrap();
        let twice = a.select(&KeySpec::prefix("c"), &KeySpec::All).unwrap().select(&KeySpec::All, &KeySpec::exact(["bob"])).unwrap();
        assert_eq!(twice, a.select(&KeySpec::prefix("c"), &KeySpec::exact(["bob"])).unwrap());
    }

    #[test]
    fn select_rejects_reversed_range() {
        let bad = KeySpec::Range("bob".into(), "alice".into());
        assert!(matches!(citations().select(&bad, &KeySpec::All), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn combine_scalar_cases() {
        let a = arr(&[("r", "c", 2.0)]);
        let b = arr(&[("r", "c", 3.0)]);
        assert_eq!(a.combine(&b, CombineOp::Add).unwrap().get_num("r", "c"), Some(5.0));
        assert_eq!(a.combine(&b, CombineOp::Sub).unwrap().get_num("r", "c"), Some(-1.0));
        assert_eq!(a.combine(&b, CombineOp::Min).unwrap().get_num("r", "c"), Some(2.0));
        assert_eq!(a.combine(&b, CombineOp::Max).unwrap().get_num("r", "c"), Some(3.0));
        assert_eq!(a.combine(&Assoc::new(), CombineOp::Add).unwrap(), a);
        assert!(a.combine(&a, CombineOp::Sub).unwrap().is_empty());
    }

    #[test]
    fn combine_disjoint() {
        let a = arr(&[("r", "c", 2.0)]);
        let b = arr(&[("r", "d", 3.0)]);
        assert!(a.combine(&b, CombineOp::Min).unwrap().is_empty());
        let max = a.combine(&b, CombineOp::Max).unwrap();
        assert_eq!(max, arr(&[("r", "c", 2.0), ("r", "d", 3.0)]));
        let sub = a.combine(&b, CombineOp::Sub).unwrap();
        assert_eq!(sub.get_num("r", "d"), Some(-3.0));
    }

    #[test]
    fn combine_rejects_string_overlap() {
        let a = Assoc::from_triples([Triple::new("r", "c", "x")], CollisionRule::Sum).unwrap();
        let b = arr(&[("r", "c", 1.0)]);
        assert!(matches!(a.combine(&b, CombineOp::Add), Err(Error::TypeMismatch { .. })));
        assert!(matches!(b.combine(&a, CombineOp::Sub), Err(Error::TypeMismatch { .. })));
        // Non-overlapping strings pass through a union.
        let c = arr(&[("s", "c", 1.0)]);
        assert_eq!(a.combine(&c, CombineOp::Add).unwrap().get("r", "c"), Some(&Value::str("x")));
        assert!(matches!(c.combine(&a, CombineOp::Sub), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn bfs_step_is_vector_matrix_multiply() {
        let v = arr(&[("q", "alice", 1.0)]);
        let step = v.multiply(&citations());
        assert_eq!(step, arr(&[("q", "bob", 1.0), ("q", "carl", 1.0)]));
    }

    #[test]
    fn multiply_by_identity_coerces_strings() {
        let a = Assoc::from_triples(
            [Triple::new("alice", "bob", "cited"), Triple::new("alice", "carl", 2.0)],
            CollisionRule::Sum,
        )
        .unwrap();
        let i = Assoc::identity(a.cols().to_vec());
        assert_eq!(a.multiply(&i), arr(&[("alice", "bob", 1.0), ("alice", "carl", 2.0)]));
    }

    #[test]
    fn multiply_matches_keys_not_positions() {
        let a = arr(&[("r", "k2", 2.0), ("r", "k9", 5.0)]);
        let b = arr(&[("k1", "c", 7.0), ("k2", "c", 3.0)]);
        assert_eq!(a.multiply(&b), arr(&[("r", "c", 6.0)]));
        assert!(a.multiply(&arr(&[("zz", "c", 1.0)])).is_empty());
    }

    #[test]
    fn multiply_cancellation_drops_entry() {
        let a = arr(&[("r", "x", 1.0), ("r", "y", 1.0)]);
        let b = arr(&[("x", "c", 2.0), ("y", "c", -2.0), ("y", "d", 1.0)]);
        let p = a.multiply(&b);
        assert_eq!(p, arr(&[("r", "d", 1.0)]));
        p.check_invariants().unwrap();
    }

    #[test]
    fn transpose_cases() {
        let a = arr(&[("a", "b", 1.0)]);
        assert_eq!(a.transpose(), arr(&[("b", "a", 1.0)]));
        assert_eq!(Assoc::new().transpose(), Assoc::new());
        let sym = arr(&[("a", "b", 2.0), ("b", "a", 2.0), ("a", "a", 1.0)]);
        assert_eq!(sym.transpose(), sym);
        let c = citations();
        assert_eq!(c.transpose().transpose(), c);
        c.transpose().check_invariants().unwrap();
    }

    #[test]
    fn threshold_is_strict() {
        let a = arr(&[("a", "a", 1.0), ("a", "b", 2.0), ("b", "b", 1.0)]);
        assert_eq!(a.threshold(0.0).unwrap(), a);
        assert!(a.threshold(2.0).unwrap().is_empty());
        let t = a.threshold(1.0).unwrap();
        assert_eq!(t, arr(&[("a", "b", 2.0)]));
        t.check_invariants().unwrap();
        let s = Assoc::from_triples([Triple::new("a", "b", "x")], CollisionRule::Sum).unwrap();
        assert!(matches!(s.threshold(0.0), Err(Error::TypeMismatch { .. })));
    }
}
