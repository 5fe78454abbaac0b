//! Sparse symmetric third-order tensor storage and contractions.
//!
//! A tensor over `n = n1 * n2` candidate correspondences is stored as a list
//! of canonical entries `(a, b, c, w)` with `a < b < c`; evaluation expands
//! each entry over all six index orderings, so a canonical entry represents
//! the fully symmetric tensor that carries `w` at every ordering of
//! `{a, b, c}`. Strictly repeated indices are excluded: only genuine
//! third-order terms are kept.
//!
//! Contractions come in three shapes: the scalar form `F(x, y, z)`, the
//! gradient vector `F(., y, z)`, and the slice matrix `F(x, ., .)`. When the
//! arguments are binary the gradient and slice use incidence indexes over the
//! active components instead of sweeping every entry, which is the cheap
//! regime for assignment vectors.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::{cast, Scalar};

/// Problem dimensions: `n1` source points mapped into `n2` target points,
/// `n1 <= n2`. Correspondence `(i, j)` has linear index `i * n2 + j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProblemDims {
    n1: usize,
    n2: usize,
}

impl ProblemDims {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 1 || n1 > n2 {
            return Err(Error::BadShape { n1, n2 });
        }
        Ok(Self { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Total number of candidate correspondences `n = n1 * n2`.
    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    /// Linear index of correspondence `(i, j)`.
    pub fn linear(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2);
        i * self.n2 + j
    }

    /// Inverse of [`linear`](Self::linear).
    pub fn unpack(&self, a: usize) -> (usize, usize) {
        debug_assert!(a < self.n());
        (a / self.n2, a % self.n2)
    }
}

/// One canonical tensor entry with strictly increasing indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry<T> {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub w: T,
}

/// What to do with raw entries that repeat an index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DiagonalPolicy {
    /// Reject the whole input with [`Error::DiagonalEntry`].
    #[default]
    Reject,
    /// Silently drop such entries.
    Drop,
}

/// Sparse symmetric third-order tensor.
///
/// Immutable after construction; the pair-incidence index used by the binary
/// gradient path is built lazily on first use and shared across threads.
#[derive(Debug)]
pub struct SparseTensor3<T> {
    dims: ProblemDims,
    entries: Vec<Entry<T>>,
    /// For each linear index, ids of the canonical entries containing it.
    incidence: Vec<Vec<u32>>,
    /// For each unordered index pair (lo, hi), ids of entries containing both.
    pair_incidence: OnceLock<HashMap<(u32, u32), Vec<u32>>>,
}

/// Entry counts of the symmetrized tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorStats {
    /// Number of nonzero symmetrized entries (six per canonical entry).
    pub nnz_symmetrized: u64,
    /// Mean number of symmetrized entries incident to an occupied index pair.
    pub avg_entries_per_pair: f64,
    /// Mean number of symmetrized entries incident to an occupied index.
    pub avg_entries_per_index: f64,
}

impl<T: Scalar> SparseTensor3<T> {
    /// Canonicalizes a raw entry list: indices of each triple are sorted into
    /// `a < b < c` and weights of duplicate unordered triples are summed.
    pub fn from_raw(
        dims: ProblemDims,
        raw: &[(usize, usize, usize, T)],
        policy: DiagonalPolicy,
    ) -> Result<Self> {
        let n = dims.n();
        let mut merged: BTreeMap<(u32, u32, u32), T> = BTreeMap::new();
        for &(i, j, k, w) in raw {
            for idx in [i, j, k] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if i == j || i == k || j == k {
                match policy {
                    DiagonalPolicy::Drop => continue,
                    DiagonalPolicy::Reject => return Err(Error::DiagonalEntry { i, j, k }),
                }
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::NegativeWeight {
                    i,
                    j,
                    k,
                    w: w.to_f64().unwrap_or(f64::NAN),
                });
            }
            let mut t = [i as u32, j as u32, k as u32];
            t.sort_unstable();
            *merged.entry((t[0], t[1], t[2])).or_insert_with(T::zero) += w;
        }
        let entries: Vec<Entry<T>> = merged
            .into_iter()
            .map(|((a, b, c), w)| Entry { a, b, c, w })
            .collect();
        Ok(Self::from_canonical_unchecked(dims, entries))
    }

    /// Builds from entries already in canonical sorted order without
    /// duplicates; used by the text reader after validation.
    fn from_canonical_unchecked(dims: ProblemDims, entries: Vec<Entry<T>>) -> Self {
        let mut incidence = vec![Vec::new(); dims.n()];
        for (id, e) in entries.iter().enumerate() {
            incidence[e.a as usize].push(id as u32);
            incidence[e.b as usize].push(id as u32);
            incidence[e.c as usize].push(id as u32);
        }
        Self {
            dims,
            entries,
            incidence,
            pair_incidence: OnceLock::new(),
        }
    }

    /// Random tensor with `nnz` distinct canonical entries and weights in
    /// `(0, 1]`; used by benchmarks and the reference checks.
    pub fn random<R: Rng>(dims: ProblemDims, nnz: usize, rng: &mut R) -> Self {
        let n = dims.n();
        let max_nnz = if n < 3 { 0 } else { n * (n - 1) * (n - 2) / 6 };
        let want = nnz.min(max_nnz);
        let mut merged: BTreeMap<(u32, u32, u32), T> = BTreeMap::new();
        while merged.len() < want {
            let mut t = [
                rng.random_range(0..n) as u32,
                rng.random_range(0..n) as u32,
                rng.random_range(0..n) as u32,
            ];
            t.sort_unstable();
            if t[0] == t[1] || t[1] == t[2] {
                continue;
            }
            let w: f64 = 1.0 - rng.random::<f64>();
            merged.entry((t[0], t[1], t[2])).or_insert_with(|| cast(w));
        }
        let entries = merged
            .into_iter()
            .map(|((a, b, c), w)| Entry { a, b, c, w })
            .collect();
        Self::from_canonical_unchecked(dims, entries)
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    pub fn entries(&self) -> &[Entry<T>] {
        &self.entries
    }

    /// Number of canonical entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.dims.n() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.n(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn pair_index(&self) -> &HashMap<(u32, u32), Vec<u32>> {
        self.pair_incidence.get_or_init(|| {
            let mut map: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
            for (id, e) in self.entries.iter().enumerate() {
                for (s, t) in [(e.a, e.b), (e.a, e.c), (e.b, e.c)] {
                    map.entry((s, t)).or_default().push(id as u32);
                }
            }
            map
        })
    }

    /// Scalar multilinear form `F(x, y, z)`; symmetric in its arguments.
    pub fn eval(&self, x: &[T], y: &[T], z: &[T]) -> Result<T> {
        self.check_len(x)?;
        self.check_len(y)?;
        self.check_len(z)?;
        let mut acc = T::zero();
        for e in &self.entries {
            let (a, b, c) = (e.a as usize, e.b as usize, e.c as usize);
            let s = x[a] * (y[b] * z[c] + y[c] * z[b])
                + x[b] * (y[a] * z[c] + y[c] * z[a])
                + x[c] * (y[a] * z[b] + y[b] * z[a]);
            acc += e.w * s;
        }
        Ok(acc)
    }

    /// Cubic score `S(x) = F(x, x, x)`.
    pub fn score(&self, x: &[T]) -> Result<T> {
        self.eval(x, x, x)
    }

    /// Gradient vector `g[r] = sum_{s,t} F_rst y[s] z[t]`, so that
    /// `<x, g> = F(x, y, z)` for every `x`.
    pub fn grad(&self, y: &[T], z: &[T]) -> Result<Vec<T>> {
        self.check_len(y)?;
        self.check_len(z)?;
        let n = self.dims.n();
        let mut g = vec![T::zero(); n];
        match (binary_support(y), binary_support(z)) {
            (Some(sy), Some(sz)) if sy.len() * sz.len() < 6 * self.entries.len() => {
                let pairs = self.pair_index();
                for &s in &sy {
                    for &t in &sz {
                        if s == t {
                            continue;
                        }
                        let key = (s.min(t), s.max(t));
                        if let Some(ids) = pairs.get(&key) {
                            for &id in ids {
                                let e = &self.entries[id as usize];
                                let r = (e.a + e.b + e.c - s - t) as usize;
                                g[r] += e.w;
                            }
                        }
                    }
                }
            }
            _ => {
                for e in &self.entries {
                    let (a, b, c) = (e.a as usize, e.b as usize, e.c as usize);
                    g[a] += e.w * (y[b] * z[c] + y[c] * z[b]);
                    g[b] += e.w * (y[a] * z[c] + y[c] * z[a]);
                    g[c] += e.w * (y[a] * z[b] + y[b] * z[a]);
                }
            }
        }
        Ok(g)
    }

    /// Slice matrix `A[s, t] = sum_r F_rst x[r]`, so that
    /// `<y, A z> = F(x, y, z)`.
    pub fn slice(&self, x: &[T]) -> Result<SliceMatrix<T>> {
        self.check_len(x)?;
        let mut upper: HashMap<(u32, u32), T> = HashMap::new();
        let mut add = |s: u32, t: u32, v: T| {
            *upper.entry((s, t)).or_insert_with(T::zero) += v;
        };
        match binary_support(x) {
            Some(sx) => {
                for &r in &sx {
                    for &id in &self.incidence[r as usize] {
                        let e = &self.entries[id as usize];
                        if r == e.a {
                            add(e.b, e.c, e.w);
                        } else if r == e.b {
                            add(e.a, e.c, e.w);
                        } else {
                            add(e.a, e.b, e.w);
                        }
                    }
                }
            }
            None => {
                for e in &self.entries {
                    let (a, b, c) = (e.a as usize, e.b as usize, e.c as usize);
                    if x[a] != T::zero() {
                        add(e.b, e.c, e.w * x[a]);
                    }
                    if x[b] != T::zero() {
                        add(e.a, e.c, e.w * x[b]);
                    }
                    if x[c] != T::zero() {
                        add(e.a, e.b, e.w * x[c]);
                    }
                }
            }
        }
        Ok(SliceMatrix::from_upper(self.dims.n(), upper))
    }

    /// Entry counts over the symmetrized tensor.
    pub fn stats(&self) -> TensorStats {
        let nnz_symmetrized = 6 * self.entries.len() as u64;
        let occupied: Vec<usize> = self
            .incidence
            .iter()
            .filter(|ids| !ids.is_empty())
            .map(|ids| ids.len())
            .collect();
        let avg_entries_per_index = if occupied.is_empty() {
            0.0
        } else {
            6.0 * occupied.iter().sum::<usize>() as f64 / occupied.len() as f64
        };
        let pairs = self.pair_index();
        let avg_entries_per_pair = if pairs.is_empty() {
            0.0
        } else {
            6.0 * pairs.values().map(Vec::len).sum::<usize>() as f64 / pairs.len() as f64
        };
        TensorStats {
            nnz_symmetrized,
            avg_entries_per_pair,
            avg_entries_per_index,
        }
    }

    /// Writes the text format: header `n1 n2 nnz`, then one `a b c w` line
    /// per canonical entry, indices 0-based, `w` in shortest round-trip form.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{} {} {}", self.dims.n1, self.dims.n2, self.entries.len())?;
        for e in &self.entries {
            writeln!(out, "{} {} {} {}", e.a, e.b, e.c, e.w)?;
        }
        Ok(())
    }

    /// Reads the text format written by [`write_text`](Self::write_text).
    /// Rejects non-canonical lines: indices must satisfy `a < b < c`, lie in
    /// range, and no unordered triple may appear twice.
    pub fn read_text<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor file".into()))??;
        let head: Vec<usize> = parse_fields(&header, "header")?;
        if head.len() != 3 {
            return Err(Error::Parse(format!(
                "header must be `n1 n2 nnz`, got {head:?}"
            )));
        }
        let dims = ProblemDims::new(head[0], head[1])?;
        let nnz = head[2];
        let n = dims.n();
        let mut entries: Vec<Entry<T>> = Vec::with_capacity(nnz);
        let mut seen: BTreeMap<(u32, u32, u32), ()> = BTreeMap::new();
        for _ in 0..nnz {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of tensor file".into()))??;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("expected `a b c w`, got `{line}`")));
            }
            let a: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index `{}`", fields[0])))?;
            let b: usize = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index `{}`", fields[1])))?;
            let c: usize = fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index `{}`", fields[2])))?;
            let w: f64 = fields[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad weight `{}`", fields[3])))?;
            if !(a < b && b < c) {
                return Err(Error::Parse(format!(
                    "non-canonical entry ({a}, {b}, {c}): indices must be strictly increasing"
                )));
            }
            if c >= n {
                return Err(Error::IndexOutOfRange { index: c, n });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeWeight { i: a, j: b, k: c, w });
            }
            let key = (a as u32, b as u32, c as u32);
            if seen.insert(key, ()).is_some() {
                return Err(Error::Parse(format!("duplicate entry ({a}, {b}, {c})")));
            }
            entries.push(Entry {
                a: a as u32,
                b: b as u32,
                c: c as u32,
                w: cast(w),
            });
        }
        entries.sort_by_key(|e| (e.a, e.b, e.c));
        Ok(Self::from_canonical_unchecked(dims, entries))
    }
}

fn parse_fields(line: &str, what: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad {what} field `{f}`")))
        })
        .collect()
}

/// Support of an exactly-binary vector (entries 0 or 1), or `None`.
pub(crate) fn binary_support<T: Scalar>(v: &[T]) -> Option<Vec<u32>> {
    let mut support = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        if x == T::one() {
            support.push(i as u32);
        } else if x != T::zero() {
            return None;
        }
    }
    Some(support)
}

/// Symmetric sparse matrix in CSR form with both triangles stored.
#[derive(Clone, Debug)]
pub struct SliceMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<T>,
}

impl<T: Scalar> SliceMatrix<T> {
    fn from_upper(n: usize, upper: HashMap<(u32, u32), T>) -> Self {
        let mut pairs: Vec<((u32, u32), T)> = upper.into_iter().collect();
        pairs.sort_by_key(|&(k, _)| k);
        let mut counts = vec![0usize; n];
        for &((s, t), _) in &pairs {
            counts[s as usize] += 1;
            if s != t {
                counts[t as usize] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r] + counts[r];
        }
        let total = row_ptr[n];
        let mut col = vec![0u32; total];
        let mut val = vec![T::zero(); total];
        let mut next = row_ptr.clone();
        // Upper pairs are sorted by (s, t); inserting (s, t) then mirroring
        // keeps each row's columns in ascending order.
        for &((s, t), w) in &pairs {
            let p = next[s as usize];
            col[p] = t;
            val[p] = w;
            next[s as usize] += 1;
        }
        let mut lower: Vec<((u32, u32), T)> = pairs
            .iter()
            .filter(|&&((s, t), _)| s != t)
            .map(|&((s, t), w)| ((t, s), w))
            .collect();
        lower.sort_by_key(|&(k, _)| k);
        for ((s, t), w) in lower {
            let p = next[s as usize];
            col[p] = t;
            val[p] = w;
            next[s as usize] += 1;
        }
        // Merge each row back into ascending column order (upper fill then
        // lower fill may interleave).
        let mut out_col = Vec::with_capacity(total);
        let mut out_val = Vec::with_capacity(total);
        let mut out_ptr = vec![0usize; n + 1];
        for r in 0..n {
            let mut row: Vec<(u32, T)> = (row_ptr[r]..row_ptr[r + 1])
                .map(|p| (col[p], val[p]))
                .collect();
            row.sort_by_key(|&(c, _)| c);
            for (c, w) in row {
                out_col.push(c);
                out_val.push(w);
            }
            out_ptr[r + 1] = out_col.len();
        }
        Self {
            n,
            row_ptr: out_ptr,
            col: out_col,
            val: out_val,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.col[p] as usize, self.val[p]))
    }

    pub fn get(&self, s: usize, t: usize) -> T {
        self.row(s)
            .find(|&(c, _)| c == t)
            .map_or(T::zero(), |(_, v)| v)
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for r in 0..self.n {
            let mut acc = T::zero();
            for (c, w) in self.row(r) {
                acc += w * v[c];
            }
            out[r] = acc;
        }
        out
    }

    /// `<y, A z>`.
    pub fn quad(&self, y: &[T], z: &[T]) -> T {
        let mut acc = T::zero();
        for r in 0..self.n {
            if y[r] == T::zero() {
                continue;
            }
            let mut row_acc = T::zero();
            for (c, w) in self.row(r) {
                row_acc += w * z[c];
            }
            acc += y[r] * row_acc;
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n * self.n];
        for r in 0..self.n {
            for (c, w) in self.row(r) {
                out[r * self.n + c] = w;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn dims(n1: usize, n2: usize) -> ProblemDims {
        ProblemDims::new(n1, n2).unwrap()
    }

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn canonicalize_reorders() {
        let t = SparseTensor3::<f64>::from_raw(
            dims(1, 3),
            &[(2, 1, 0, 1.0)],
            DiagonalPolicy::Reject,
        )
        .unwrap();
        assert_eq!(t.entries(), &[Entry { a: 0, b: 1, c: 2, w: 1.0 }]);
    }

    #[test]
    fn canonicalize_merges_duplicates() {
        let t = SparseTensor3::<f64>::from_raw(
            dims(1, 3),
            &[(0, 1, 2, 1.0), (1, 2, 0, 2.0)],
            DiagonalPolicy::Reject,
        )
        .unwrap();
        assert_eq!(t.entries(), &[Entry { a: 0, b: 1, c: 2, w: 3.0 }]);
    }

    #[test]
    fn canonicalize_diagonal_policy() {
        let raw = [(0usize, 0usize, 1usize, 1.0f64)];
        let dropped =
            SparseTensor3::<f64>::from_raw(dims(1, 2), &raw, DiagonalPolicy::Drop).unwrap();
        assert!(dropped.is_empty());
        let rejected = SparseTensor3::<f64>::from_raw(dims(1, 2), &raw, DiagonalPolicy::Reject);
        assert!(matches!(rejected, Err(Error::DiagonalEntry { .. })));
    }

    #[test]
    fn canonicalize_rejects_out_of_range() {
        let r = SparseTensor3::<f64>::from_raw(dims(1, 3), &[(0, 1, 3, 1.0)], DiagonalPolicy::Reject);
        assert!(matches!(r, Err(Error::IndexOutOfRange { index: 3, n: 3 })));
    }

    #[test]
    fn eval_zero_tensor() {
        let t = SparseTensor3::<f64>::from_raw(dims(2, 2), &[], DiagonalPolicy::Reject).unwrap();
        let v = vec![1.0; 4];
        assert_eq!(t.eval(&v, &v, &v).unwrap(), 0.0);
    }

    #[test]
    fn eval_single_entry() {
        let t = SparseTensor3::<f64>::from_raw(dims(1, 3), &[(0, 1, 2, 1.0)], DiagonalPolicy::Reject)
            .unwrap();
        let (e0, e1, e2) = (unit(3, 0), unit(3, 1), unit(3, 2));
        assert_eq!(t.eval(&e0, &e1, &e2).unwrap(), 1.0);
        let ones = vec![1.0; 3];
        assert_eq!(t.eval(&ones, &ones, &ones).unwrap(), 6.0);
    }

    #[test]
    fn grad_single_entry_matches_dense() {
        // g[0] = F_{0,1,2} * y[1] * z[2] with y = e1, z = e2.
        let t = SparseTensor3::<f64>::from_raw(dims(1, 3), &[(0, 1, 2, 1.0)], DiagonalPolicy::Reject)
            .unwrap();
        let g = t.grad(&unit(3, 1), &unit(3, 2)).unwrap();
        let expect = oracle::dense_grad(&t, &unit(3, 1), &unit(3, 2)).unwrap();
        assert_eq!(g, expect);
        assert_eq!(g, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn slice_single_entry() {
        let t = SparseTensor3::<f64>::from_raw(dims(1, 3), &[(0, 1, 2, 1.0)], DiagonalPolicy::Reject)
            .unwrap();
        let a = t.slice(&unit(3, 0)).unwrap();
        let dense = a.to_dense();
        let mut expect = vec![0.0; 9];
        let idx = |s: usize, t: usize| s * 3 + t;
        expect[idx(1, 2)] = 1.0;
        expect[idx(2, 1)] = 1.0;
        assert_eq!(dense, expect);
    }

    #[test]
    fn stats_counts() {
        let empty = SparseTensor3::<f64>::from_raw(dims(1, 3), &[], DiagonalPolicy::Reject).unwrap();
        let s = empty.stats();
        assert_eq!(s.nnz_symmetrized, 0);
        assert_eq!(s.avg_entries_per_pair, 0.0);
        assert_eq!(s.avg_entries_per_index, 0.0);

        let one = SparseTensor3::<f64>::from_raw(dims(1, 3), &[(0, 1, 2, 1.0)], DiagonalPolicy::Reject)
            .unwrap();
        let s = one.stats();
        assert_eq!(s.nnz_symmetrized, 6);
        assert_eq!(s.avg_entries_per_index, 6.0);

        let two = SparseTensor3::<f64>::from_raw(
            dims(1, 6),
            &[(0, 1, 2, 1.0), (3, 4, 5, 2.0)],
            DiagonalPolicy::Reject,
        )
        .unwrap();
        assert_eq!(two.stats().nnz_symmetrized, 12);
    }

    #[test]
    fn contractions_match_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for case in 0..20 {
            let d = dims(2, 3 + case % 3);
            let n = d.n();
            let t = SparseTensor3::<f64>::random(d, 5 + case, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.3).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.3).collect();
            let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.3).collect();
            let val = t.eval(&x, &y, &z).unwrap();
            let dval = oracle::dense_eval(&t, &x, &y, &z).unwrap();
            assert_relative_eq!(val, dval, max_relative = 1e-12, epsilon = 1e-12);

            let g = t.grad(&y, &z).unwrap();
            let dg = oracle::dense_grad(&t, &y, &z).unwrap();
            for (a, b) in g.iter().zip(&dg) {
                assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-12);
            }

            let a = t.slice(&x).unwrap();
            let quad = a.quad(&y, &z);
            assert_relative_eq!(quad, val, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn binary_grad_path_matches_sweep() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let d = dims(3, 4);
        let n = d.n();
        let t = SparseTensor3::<f64>::random(d, 60, &mut rng);
        // Binary vectors with assignment-like support.
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..3 {
            y[d.linear(i, i)] = 1.0;
            z[d.linear(i, (i + 1) % 4)] = 1.0;
        }
        let fast = t.grad(&y, &z).unwrap();
        let dense = oracle::dense_grad(&t, &y, &z).unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let t = SparseTensor3::<f64>::random(dims(2, 3), 8, &mut rng);
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = SparseTensor3::<f64>::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(back.dims(), t.dims());
        assert_eq!(back.entries(), t.entries());
    }

    #[test]
    fn reader_rejects_non_canonical() {
        let text = "1 3 1\n1 0 2 1.0\n";
        let r = SparseTensor3::<f64>::read_text(&mut text.as_bytes());
        assert!(matches!(r, Err(Error::Parse(_))));
        let dup = "1 3 2\n0 1 2 1.0\n0 1 2 2.0\n";
        let r = SparseTensor3::<f64>::read_text(&mut dup.as_bytes());
        assert!(matches!(r, Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn eval_is_symmetric_and_multilinear(seed in 0u64..40) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let d = dims(2, 3);
            let n = d.n();
            let t = SparseTensor3::<f64>::random(d, 10, &mut rng);
            let rv = |rng: &mut ChaCha12Rng| -> Vec<f64> {
                (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
            };
            let (x, y, z) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
            let base = t.eval(&x, &y, &z).unwrap();
            for (p, q, r) in [(&y, &x, &z), (&z, &y, &x), (&x, &z, &y), (&y, &z, &x), (&z, &x, &y)] {
                let v = t.eval(p, q, r).unwrap();
                prop_assert!((v - base).abs() <= 1e-12 * base.abs().max(1.0));
            }
            // multilinearity in the first argument
            let x2 = rv(&mut rng);
            let (a, b) = (0.7, -1.3);
            let mix: Vec<f64> = x.iter().zip(&x2).map(|(&u, &v)| a * u + b * v).collect();
            let lhs = t.eval(&mix, &y, &z).unwrap();
            let rhs = a * base + b * t.eval(&x2, &y, &z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn grad_and_slice_are_consistent(seed in 0u64..40) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5bd1e995);
            let d = dims(2, 4);
            let n = d.n();
            let t = SparseTensor3::<f64>::random(d, 20, &mut rng);
            let rv = |rng: &mut ChaCha12Rng| -> Vec<f64> {
                (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
            };
            let (x, y, z) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
            let form = t.eval(&x, &y, &z).unwrap();
            let g = t.grad(&y, &z).unwrap();
            let via_grad: f64 = x.iter().zip(&g).map(|(&a, &b)| a * b).sum();
            prop_assert!((via_grad - form).abs() <= 1e-12 * form.abs().max(1.0));
            let a = t.slice(&x).unwrap();
            let via_slice = a.quad(&y, &z);
            prop_assert!((via_slice - form).abs() <= 1e-12 * form.abs().max(1.0));
        }
    }
}
