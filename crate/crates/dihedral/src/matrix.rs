//! Sparse exact matrices and the elimination kernel.
//!
//! Everything downstream (validators, homology, the long exact sequence)
//! reduces to four primitives implemented here: rank, kernel bases, image
//! bases, and Smith normal form. Field elimination keeps rows
//! integer-normalized over the rationals so no denominator churn occurs
//! mid-elimination; the Smith form works on arbitrary-precision integers
//! with minimal-absolute-value pivoting.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::LinalgError;
use crate::ring::{RingSpec, Scalar};

/// A sparse vector: sorted `(index, nonzero scalar)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, Scalar)>,
}

impl SparseVec {
    pub fn zero(dim: usize) -> SparseVec {
        SparseVec {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn unit(dim: usize, idx: usize, ring: RingSpec) -> SparseVec {
        SparseVec {
            dim,
            entries: vec![(idx, ring.one())],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn leading(&self) -> Option<usize> {
        self.entries.first().map(|(i, _)| *i)
    }

    pub fn get(&self, idx: usize) -> Option<&Scalar> {
        self.entries
            .binary_search_by_key(&idx, |(i, _)| *i)
            .ok()
            .map(|k| &self.entries[k].1)
    }

    /// `self += c * other`, merging sorted entry lists.
    pub fn axpy(&mut self, c: &Scalar, other: &SparseVec) {
        if c.is_zero() || other.is_zero() {
            return;
        }
        let mut merged = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let take_self = match (self.entries.get(i), other.entries.get(j)) {
                (Some((a, _)), Some((b, _))) => {
                    if a == b {
                        let v = self.entries[i].1.add(&c.mul(&other.entries[j].1));
                        if !v.is_zero() {
                            merged.push((*a, v));
                        }
                        i += 1;
                        j += 1;
                        continue;
                    }
                    a < b
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_self {
                merged.push(self.entries[i].clone());
                i += 1;
            } else {
                let (idx, v) = &other.entries[j];
                let v = c.mul(v);
                if !v.is_zero() {
                    merged.push((*idx, v));
                }
                j += 1;
            }
        }
        self.entries = merged;
    }

    pub fn scale(&mut self, c: &Scalar) {
        if c.is_zero() {
            self.entries.clear();
            return;
        }
        for (_, v) in &mut self.entries {
            *v = v.mul(c);
        }
    }

    /// Over the rationals: clear denominators and divide by the content so
    /// all entries are coprime integers with a positive leading entry.
    /// Leaves other rings untouched.
    fn normalize_content(&mut self, ring: RingSpec) {
        if ring != RingSpec::Rationals || self.entries.is_empty() {
            return;
        }
        let mut lcm = BigInt::one();
        for (_, v) in &self.entries {
            let q = v.as_rational().expect("rational ring");
            lcm = lcm.lcm(q.denom());
        }
        let mut gcd = BigInt::zero();
        let ints: Vec<BigInt> = self
            .entries
            .iter()
            .map(|(_, v)| {
                let q = v.as_rational().unwrap();
                (q.numer() * &lcm) / q.denom()
            })
            .collect();
        for n in &ints {
            gcd = gcd.gcd(n);
        }
        if gcd.is_zero() {
            return;
        }
        let sign = if ints[0].is_negative() {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        let div = gcd * sign;
        for ((_, v), n) in self.entries.iter_mut().zip(ints) {
            *v = Scalar::from_bigint(ring, &(n / &div));
        }
    }
}

/// A sparse matrix over an exact ring. Columns are the images of the source
/// basis: the matrix of a linear map `V -> W` has `rows = dim W`,
/// `cols = dim V`. No stored entry is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    ring: RingSpec,
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Scalar>,
}

impl SparseMatrix {
    pub fn zero(ring: RingSpec, rows: usize, cols: usize) -> SparseMatrix {
        SparseMatrix {
            ring,
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(ring: RingSpec, n: usize) -> SparseMatrix {
        let mut m = SparseMatrix::zero(ring, n, n);
        for i in 0..n {
            m.entries.insert((i, i), ring.one());
        }
        m
    }

    /// Test helper: build from a dense integer table.
    pub fn from_rows(ring: RingSpec, table: &[&[i64]]) -> SparseMatrix {
        let rows = table.len();
        let cols = table.first().map_or(0, |r| r.len());
        let mut m = SparseMatrix::zero(ring, rows, cols);
        for (i, row) in table.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, ring.from_i64(*v));
            }
        }
        m
    }

    pub fn ring(&self) -> RingSpec {
        self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.entries
            .get(&(r, c))
            .cloned()
            .unwrap_or_else(|| self.ring.zero())
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.rows && c < self.cols, "entry out of bounds");
        assert_eq!(v.ring(), self.ring, "entry ring mismatch");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &Scalar) {
        let cur = self.get(r, c).add(v);
        self.set(r, c, cur);
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        self.entries.iter().map(|((r, c), v)| (*r, *c, v))
    }

    /// Copy `block` into `self` at the given offset, adding to what is there.
    pub fn add_block(&mut self, row_off: usize, col_off: usize, block: &SparseMatrix) {
        assert_eq!(block.ring, self.ring);
        assert!(row_off + block.rows <= self.rows && col_off + block.cols <= self.cols);
        for ((r, c), v) in &block.entries {
            self.add_to(row_off + r, col_off + c, v);
        }
    }

    /// Extract the sub-block of the given size at the given offset.
    pub fn sub_block(
        &self,
        row_off: usize,
        rows: usize,
        col_off: usize,
        cols: usize,
    ) -> SparseMatrix {
        let mut out = SparseMatrix::zero(self.ring, rows, cols);
        for ((r, c), v) in self
            .entries
            .range((row_off, 0)..(row_off + rows, 0))
        {
            if *c >= col_off && *c < col_off + cols {
                out.entries.insert((r - row_off, c - col_off), v.clone());
            }
        }
        out
    }

    fn check_ring(&self, other: &SparseMatrix) -> Result<(), LinalgError> {
        if self.ring != other.ring {
            return Err(LinalgError::RingMismatch(format!(
                "{} vs {}",
                self.ring, other.ring
            )));
        }
        Ok(())
    }

    /// Matrix of `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        self.check_ring(other)?;
        if self.cols != other.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "compose {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // Group our entries by column so each column of `other` streams once.
        let mut by_col: Vec<Vec<(usize, &Scalar)>> = vec![Vec::new(); self.cols];
        for ((r, c), v) in &self.entries {
            by_col[*c].push((*r, v));
        }
        let mut out = SparseMatrix::zero(self.ring, self.rows, other.cols);
        let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
        let mut cur_col = usize::MAX;
        let mut flush = |col: usize, acc: &mut BTreeMap<usize, Scalar>,
                         out: &mut SparseMatrix| {
            for (r, v) in std::mem::take(acc) {
                if !v.is_zero() {
                    out.entries.insert((r, col), v);
                }
            }
        };
        // `other` entries come out in (row, col) order; regroup per column.
        let mut cols_of_other: Vec<Vec<(usize, &Scalar)>> = vec![Vec::new(); other.cols];
        for ((r, c), v) in &other.entries {
            cols_of_other[*c].push((*r, v));
        }
        for (c, col_entries) in cols_of_other.iter().enumerate() {
            if col_entries.is_empty() {
                continue;
            }
            if cur_col != c {
                if cur_col != usize::MAX {
                    flush(cur_col, &mut acc, &mut out);
                }
                cur_col = c;
            }
            for (j, bv) in col_entries {
                for (i, av) in &by_col[*j] {
                    let prod = av.mul(bv);
                    match acc.get_mut(i) {
                        Some(cur) => *cur = cur.add(&prod),
                        None => {
                            acc.insert(*i, prod);
                        }
                    }
                }
            }
        }
        if cur_col != usize::MAX {
            flush(cur_col, &mut acc, &mut out);
        }
        Ok(out)
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        self.check_ring(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "add {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for ((r, c), v) in &other.entries {
            out.add_to(*r, *c, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        self.add(&other.scale(&self.ring.from_i64(-1)))
    }

    pub fn scale(&self, c: &Scalar) -> SparseMatrix {
        let mut out = SparseMatrix::zero(self.ring, self.rows, self.cols);
        if c.is_zero() {
            return out;
        }
        for ((r, cidx), v) in &self.entries {
            let w = v.mul(c);
            if !w.is_zero() {
                out.entries.insert((*r, *cidx), w);
            }
        }
        out
    }

    pub fn neg(&self) -> SparseMatrix {
        self.scale(&self.ring.from_i64(-1))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut out = SparseMatrix::zero(self.ring, self.cols, self.rows);
        for ((r, c), v) in &self.entries {
            out.entries.insert((*c, *r), v.clone());
        }
        out
    }

    /// Apply to a sparse column vector.
    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        assert_eq!(v.dim, self.cols, "vector dimension mismatch");
        let mut by_col: BTreeMap<usize, Vec<(usize, &Scalar)>> = BTreeMap::new();
        for ((r, c), w) in &self.entries {
            by_col.entry(*c).or_default().push((*r, w));
        }
        let mut acc: BTreeMap<usize, Scalar> = BTreeMap::new();
        for (j, x) in &v.entries {
            let Some(col) = by_col.get(j) else { continue };
            for (r, w) in col {
                let prod = w.mul(x);
                match acc.get_mut(r) {
                    Some(cur) => *cur = cur.add(&prod),
                    None => {
                        acc.insert(*r, prod);
                    }
                }
            }
        }
        SparseVec {
            dim: self.rows,
            entries: acc.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn column(&self, c: usize) -> SparseVec {
        let mut entries = Vec::new();
        for ((r, cc), v) in &self.entries {
            if *cc == c {
                entries.push((*r, v.clone()));
            }
        }
        entries.sort_by_key(|(r, _)| *r);
        SparseVec {
            dim: self.rows,
            entries,
        }
    }

    /// Rows as sparse vectors (for elimination).
    pub fn row_vectors(&self) -> Vec<SparseVec> {
        let mut rows = vec![SparseVec::zero(self.cols); self.rows];
        for ((r, c), v) in &self.entries {
            rows[*r].entries.push((*c, v.clone()));
        }
        rows
    }

    /// Columns as sparse vectors in the target space.
    pub fn column_vectors(&self) -> Vec<SparseVec> {
        let mut cols = vec![SparseVec::zero(self.rows); self.cols];
        for ((r, c), v) in &self.entries {
            cols[*c].entries.push((*r, v.clone()));
        }
        for col in &mut cols {
            col.entries.sort_by_key(|(r, _)| *r);
        }
        cols
    }

    fn require_field(&self) -> Result<(), LinalgError> {
        if !self.ring.is_field() {
            return Err(LinalgError::NotAField(self.ring.to_string()));
        }
        Ok(())
    }

    /// Rank over a field, by exact fraction-free elimination.
    pub fn rank(&self) -> Result<usize, LinalgError> {
        self.require_field()?;
        Ok(Rref::from_vectors(self.row_vectors(), self.cols, self.ring).rank())
    }

    /// A deterministic kernel basis over a field. Vectors are indexed by the
    /// free columns of the reduced echelon form, in ascending column order.
    pub fn kernel_basis(&self) -> Result<Vec<SparseVec>, LinalgError> {
        self.require_field()?;
        let rref = Rref::from_vectors(self.row_vectors(), self.cols, self.ring);
        Ok(rref.kernel_basis())
    }

    /// Indices of the pivot columns; the corresponding original columns form
    /// a deterministic basis of the column space.
    pub fn image_pivot_columns(&self) -> Result<Vec<usize>, LinalgError> {
        self.require_field()?;
        let rref = Rref::from_vectors(self.row_vectors(), self.cols, self.ring);
        Ok(rref.pivot_cols)
    }

    pub fn image_basis(&self) -> Result<Vec<SparseVec>, LinalgError> {
        Ok(self
            .image_pivot_columns()?
            .into_iter()
            .map(|c| self.column(c))
            .collect())
    }

    /// Render a short description for reports: shape, nonzero count and the
    /// first few entries.
    pub fn brief(&self) -> String {
        let mut s = format!("{}x{} nnz={}", self.rows, self.cols, self.nnz());
        for (k, ((r, c), v)) in self.entries.iter().enumerate() {
            if k == 6 {
                s.push_str(" ...");
                break;
            }
            s.push_str(&format!(" ({r},{c})={v}"));
        }
        s
    }
}

impl fmt::Display for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}x{} over {}]", self.rows, self.cols, self.ring)?;
        for ((r, c), v) in &self.entries {
            writeln!(f, "  ({r},{c}) = {v}")?;
        }
        Ok(())
    }
}

/// A reduced row echelon form with deterministic pivot bookkeeping.
///
/// Pivot rows are normalized to leading coefficient 1 and fully reduced, so
/// the row set is the canonical RREF of the input row space.
#[derive(Debug, Clone)]
pub struct Rref {
    pub ring: RingSpec,
    pub ncols: usize,
    /// Pivot rows sorted by pivot column.
    pub rows: Vec<SparseVec>,
    pub pivot_cols: Vec<usize>,
}

impl Rref {
    pub fn from_matrix_rows(m: &SparseMatrix) -> Rref {
        Rref::from_vectors(m.row_vectors(), m.cols(), m.ring())
    }

    /// Echelonize a collection of vectors (as rows).
    pub fn from_vectors(vectors: Vec<SparseVec>, ncols: usize, ring: RingSpec) -> Rref {
        assert!(ring.is_field(), "elimination needs a field");
        let mut active: Vec<SparseVec> = vectors.into_iter().filter(|v| !v.is_zero()).collect();
        for v in &mut active {
            v.normalize_content(ring);
        }
        let mut pivots: Vec<SparseVec> = Vec::new();
        loop {
            // Choose the smallest leading column still present, then the
            // sparsest row with that leading column.
            let mut best: Option<(usize, usize, usize)> = None; // (col, nnz, idx)
            for (idx, v) in active.iter().enumerate() {
                let col = v.leading().unwrap();
                let key = (col, v.entries.len(), idx);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
            let Some((col, _, idx)) = best else { break };
            let pivot = active.swap_remove(idx);
            let lead = pivot.get(col).unwrap().clone();
            for v in &mut active {
                if v.leading() == Some(col) {
                    let c = v.get(col).unwrap().div(&lead).neg();
                    v.axpy(&c, &pivot);
                    v.normalize_content(ring);
                }
            }
            active.retain(|v| !v.is_zero());
            pivots.push(pivot);
        }
        // Normalize leading coefficients and back-substitute to full RREF.
        for p in &mut pivots {
            let lead = p.entries[0].1.clone();
            let inv = lead.inv().expect("field");
            p.scale(&inv);
        }
        pivots.sort_by_key(|p| p.leading().unwrap());
        let pivot_cols: Vec<usize> = pivots.iter().map(|p| p.leading().unwrap()).collect();
        for i in (0..pivots.len()).rev() {
            for j in (i + 1)..pivots.len() {
                let col = pivot_cols[j];
                if let Some(c) = pivots[i].get(col).cloned() {
                    let neg = c.neg();
                    let (left, right) = pivots.split_at_mut(j);
                    left[i].axpy(&neg, &right[0]);
                }
            }
        }
        Rref {
            ring,
            ncols,
            rows: pivots,
            pivot_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce a vector modulo the row space. The result vanishes exactly on
    /// the pivot columns, giving a canonical coset representative.
    pub fn reduce(&self, mut v: SparseVec) -> SparseVec {
        assert_eq!(v.dim, self.ncols);
        for (row, col) in self.rows.iter().zip(&self.pivot_cols) {
            if let Some(c) = v.get(*col).cloned() {
                v.axpy(&c.neg(), row);
            }
        }
        v
    }

    /// Kernel basis of the matrix whose RREF this is: one vector per free
    /// column, ascending.
    pub fn kernel_basis(&self) -> Vec<SparseVec> {
        let mut is_pivot = vec![false; self.ncols];
        for c in &self.pivot_cols {
            is_pivot[*c] = true;
        }
        let mut basis = Vec::new();
        for free in 0..self.ncols {
            if is_pivot[free] {
                continue;
            }
            let mut v = SparseVec::unit(self.ncols, free, self.ring);
            for (row, col) in self.rows.iter().zip(&self.pivot_cols) {
                if let Some(c) = row.get(free) {
                    v.entries.push((*col, c.neg()));
                }
            }
            v.entries.sort_by_key(|(i, _)| *i);
            basis.push(v);
        }
        basis
    }
}

/// A growing span with coefficient tracking: each inserted generator is
/// remembered so that members of the span can be rewritten over the
/// generators actually inserted.
#[derive(Debug, Clone)]
pub struct TrackedSpan {
    ring: RingSpec,
    dim: usize,
    ngens: usize,
    /// (reduced vector, its expression over inserted generators)
    rows: Vec<(SparseVec, SparseVec)>,
}

impl TrackedSpan {
    pub fn new(ring: RingSpec, dim: usize) -> TrackedSpan {
        assert!(ring.is_field());
        TrackedSpan {
            ring,
            dim,
            ngens: 0,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce_tracking(&self, mut v: SparseVec) -> (SparseVec, SparseVec) {
        let mut combo = SparseVec::zero(self.ngens.max(1));
        combo.dim = self.ngens;
        for (row, expr) in &self.rows {
            let lead = row.leading().unwrap();
            if let Some(c) = v.get(lead).cloned() {
                let factor = c.div(row.get(lead).unwrap());
                let neg = factor.neg();
                v.axpy(&neg, row);
                let mut e = expr.clone();
                e.dim = self.ngens;
                combo.dim = self.ngens;
                combo.axpy(&factor, &e);
            }
        }
        (v, combo)
    }

    /// Insert a generator; returns true when it enlarged the span.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        assert_eq!(v.dim, self.dim);
        let gen_idx = self.ngens;
        self.ngens += 1;
        let (reduced, mut combo) = self.reduce_tracking(v);
        if reduced.is_zero() {
            return false;
        }
        combo.dim = self.ngens;
        // expression of the reduced vector: generator minus the combination
        let mut expr = SparseVec::unit(self.ngens, gen_idx, self.ring);
        expr.axpy(&self.ring.from_i64(-1), &combo);
        for (row, e) in &mut self.rows {
            let _ = row;
            e.dim = self.ngens;
        }
        self.rows.push((reduced, expr));
        // Keep rows ordered by leading index for determinism.
        self.rows.sort_by_key(|(r, _)| r.leading().unwrap());
        true
    }

    /// Express `v` over the inserted generators, if it lies in the span.
    pub fn solve(&self, v: SparseVec) -> Option<SparseVec> {
        assert_eq!(v.dim, self.dim);
        let (reduced, combo) = self.reduce_tracking(v);
        if reduced.is_zero() {
            Some(combo)
        } else {
            None
        }
    }
}

/// Invariant factors of an integer matrix, plus the unimodular transforms
/// retained for audit.
#[derive(Debug, Clone)]
pub struct SmithResult {
    invariant_factors: Vec<BigInt>,
    rank: usize,
    left: Vec<Vec<BigInt>>,
    right: Vec<Vec<BigInt>>,
    rows: usize,
    cols: usize,
}

impl SmithResult {
    /// The nonzero diagonal entries `d_1 | d_2 | ... | d_r`, all positive.
    pub fn invariant_factors(&self) -> &[BigInt] {
        &self.invariant_factors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Invariant factors strictly greater than one (the torsion part).
    pub fn torsion(&self) -> Vec<BigInt> {
        self.invariant_factors
            .iter()
            .filter(|d| !d.is_one())
            .cloned()
            .collect()
    }

    /// Audit: `left * m * right` must reproduce the diagonal form.
    pub fn reproduces(&self, m: &SparseMatrix) -> bool {
        if m.rows() != self.rows || m.cols() != self.cols {
            return false;
        }
        let mut dense = vec![vec![BigInt::zero(); self.cols]; self.rows];
        for (r, c, v) in m.iter() {
            dense[r][c] = v.as_bigint().cloned().unwrap_or_else(BigInt::zero);
        }
        let lm = mat_mul(&self.left, &dense);
        let lmr = mat_mul(&lm, &self.right);
        for (i, row) in lmr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j && i < self.invariant_factors.len() {
                    self.invariant_factors[i].clone()
                } else {
                    BigInt::zero()
                };
                if *v != expect {
                    return false;
                }
            }
        }
        true
    }
}

fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let k = if n > 0 { a[0].len() } else { 0 };
    let m = if !b.is_empty() { b[0].len() } else { 0 };
    let mut out = vec![vec![BigInt::zero(); m]; n];
    for i in 0..n {
        for l in 0..k {
            if a[i][l].is_zero() {
                continue;
            }
            for j in 0..m {
                if !b[l][j].is_zero() {
                    out[i][j] += &a[i][l] * &b[l][j];
                }
            }
        }
    }
    out
}

/// Smith normal form of an integer matrix.
///
/// Pivots are chosen by minimal absolute value to limit entry growth; the
/// diagonal is fixed up afterwards so consecutive entries divide.
pub fn smith_normal_form(m: &SparseMatrix) -> Result<SmithResult, LinalgError> {
    if m.ring() != RingSpec::Integers {
        return Err(LinalgError::NotIntegerRing(m.ring().to_string()));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = vec![vec![BigInt::zero(); cols]; rows];
    for (r, c, v) in m.iter() {
        a[r][c] = v.as_bigint().cloned().unwrap();
    }
    let mut left = identity_dense(rows);
    let mut right = identity_dense(cols);

    let mut k = 0;
    while k < rows.min(cols) {
        // Find the nonzero entry of minimal absolute value in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if !a[i][j].is_zero()
                    && pivot.map_or(true, |(pi, pj)| a[i][j].abs() < a[pi][pj].abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        if pi != k {
            a.swap(pi, k);
            left.swap(pi, k);
        }
        if pj != k {
            swap_cols(&mut a, pj, k);
            swap_cols(&mut right, pj, k);
        }
        // Clear row and column k; restart if a remainder produced a smaller
        // entry elsewhere in the cross.
        let mut clean = true;
        for i in (k + 1)..rows {
            if a[i][k].is_zero() {
                continue;
            }
            let q = div_round(&a[i][k], &a[k][k]);
            if !q.is_zero() {
                row_axpy_dense(&mut a, i, k, &-&q);
                row_axpy_dense(&mut left, i, k, &-&q);
            }
            if !a[i][k].is_zero() {
                clean = false;
            }
        }
        for j in (k + 1)..cols {
            if a[k][j].is_zero() {
                continue;
            }
            let q = div_round(&a[k][j], &a[k][k]);
            if !q.is_zero() {
                col_axpy_dense(&mut a, j, k, &-&q);
                col_axpy_dense(&mut right, j, k, &-&q);
            }
            if !a[k][j].is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue; // re-select a smaller pivot in the same block
        }
        // Enforce divisibility into the rest of the block: if some entry is
        // not divisible by the pivot, fold its row in and redo.
        let mut divisible = true;
        'scan: for i in (k + 1)..rows {
            for j in (k + 1)..cols {
                if !(&a[i][j] % &a[k][k]).is_zero() {
                    row_axpy_dense(&mut a, k, i, &BigInt::one());
                    row_axpy_dense(&mut left, k, i, &BigInt::one());
                    divisible = false;
                    break 'scan;
                }
            }
        }
        if !divisible {
            continue;
        }
        if a[k][k].is_negative() {
            negate_row(&mut a, k);
            negate_row(&mut left, k);
        }
        k += 1;
    }
    let mut invariant_factors = Vec::new();
    for i in 0..rows.min(cols) {
        if a[i][i].is_zero() {
            break;
        }
        invariant_factors.push(a[i][i].clone());
    }
    let rank = invariant_factors.len();
    Ok(SmithResult {
        invariant_factors,
        rank,
        left,
        right,
        rows,
        cols,
    })
}

fn identity_dense(n: usize) -> Vec<Vec<BigInt>> {
    let mut m = vec![vec![BigInt::zero(); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = BigInt::one();
    }
    m
}

fn swap_cols(m: &mut [Vec<BigInt>], a: usize, b: usize) {
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

/// row_i += q * row_j
fn row_axpy_dense(m: &mut [Vec<BigInt>], i: usize, j: usize, q: &BigInt) {
    let rj = m[j].clone();
    for (x, y) in m[i].iter_mut().zip(rj) {
        *x += q * y;
    }
}

/// col_i += q * col_j
fn col_axpy_dense(m: &mut [Vec<BigInt>], i: usize, j: usize, q: &BigInt) {
    for row in m.iter_mut() {
        let y = row[j].clone();
        row[i] += q * y;
    }
}

fn negate_row(m: &mut [Vec<BigInt>], i: usize) {
    for x in &mut m[i] {
        *x = -x.clone();
    }
}

/// Rounded division: quotient minimizing |a - q*b|.
fn div_round(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    let double = &r * 2;
    if double.abs() > b.abs() {
        if (r.is_negative()) == (b.is_negative()) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q: RingSpec = RingSpec::Rationals;
    const Z: RingSpec = RingSpec::Integers;
    const F5: RingSpec = RingSpec::PrimeField(5);

    #[test]
    fn rank_identity() {
        let m = SparseMatrix::identity(Q, 2);
        assert_eq!(m.rank().unwrap(), 2);
    }

    #[test]
    fn rank_zero_matrix() {
        let m = SparseMatrix::zero(F5, 3, 4);
        assert_eq!(m.rank().unwrap(), 0);
    }

    #[test]
    fn rank_dependent_rows() {
        let m = SparseMatrix::from_rows(Q, &[&[2, 4], &[1, 2]]);
        assert_eq!(m.rank().unwrap(), 1);
    }

    #[test]
    fn rank_needs_field() {
        let m = SparseMatrix::identity(Z, 2);
        assert!(matches!(m.rank(), Err(LinalgError::NotAField(_))));
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        let m = SparseMatrix::identity(Q, 3);
        assert!(m.kernel_basis().unwrap().is_empty());
    }

    #[test]
    fn kernel_of_zero_is_everything() {
        let m = SparseMatrix::zero(Q, 2, 3);
        let k = m.kernel_basis().unwrap();
        assert_eq!(k.len(), 3);
        for (i, v) in k.iter().enumerate() {
            assert_eq!(*v, SparseVec::unit(3, i, Q));
        }
    }

    #[test]
    fn kernel_of_sum_map() {
        let m = SparseMatrix::from_rows(Q, &[&[1, 1]]);
        let k = m.kernel_basis().unwrap();
        assert_eq!(k.len(), 1);
        // x + y = 0: the vector is proportional to (1, -1)
        let v = &k[0];
        let x = v.get(0).unwrap();
        let y = v.get(1).unwrap();
        assert_eq!(x.neg(), *y);
        assert!(!x.is_zero());
    }

    #[test]
    fn compose_with_identity_and_zero() {
        let m = SparseMatrix::from_rows(Q, &[&[1, 2], &[3, 4]]);
        let id = SparseMatrix::identity(Q, 2);
        assert_eq!(id.compose(&m).unwrap(), m);
        let z = SparseMatrix::zero(Q, 2, 2);
        assert_eq!(m.compose(&z).unwrap(), z);
    }

    #[test]
    fn nilpotent_square_is_zero() {
        let n = SparseMatrix::from_rows(Q, &[&[0, 1], &[0, 0]]);
        assert!(n.compose(&n).unwrap().is_zero());
    }

    #[test]
    fn compose_shape_mismatch() {
        let a = SparseMatrix::zero(Q, 2, 3);
        let b = SparseMatrix::zero(Q, 2, 3);
        assert!(matches!(
            a.compose(&b),
            Err(LinalgError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn ring_mismatch_detected() {
        let a = SparseMatrix::identity(Q, 2);
        let b = SparseMatrix::identity(F5, 2);
        assert!(matches!(a.add(&b), Err(LinalgError::RingMismatch(_))));
    }

    #[test]
    fn snf_already_diagonal() {
        let m = SparseMatrix::from_rows(Z, &[&[2, 0], &[0, 6]]);
        let s = smith_normal_form(&m).unwrap();
        assert_eq!(
            s.invariant_factors(),
            &[BigInt::from(2), BigInt::from(6)]
        );
        assert!(s.reproduces(&m));
    }

    #[test]
    fn snf_rank_one() {
        let m = SparseMatrix::from_rows(Z, &[&[2, 4], &[4, 8]]);
        let s = smith_normal_form(&m).unwrap();
        assert_eq!(s.invariant_factors(), &[BigInt::from(2)]);
        assert_eq!(s.rank(), 1);
        assert!(s.reproduces(&m));
    }

    #[test]
    fn snf_zero_matrix() {
        let m = SparseMatrix::zero(Z, 3, 2);
        let s = smith_normal_form(&m).unwrap();
        assert!(s.invariant_factors().is_empty());
        assert!(s.reproduces(&m));
    }

    #[test]
    fn snf_requires_integers() {
        let m = SparseMatrix::identity(Q, 2);
        assert!(matches!(
            smith_normal_form(&m),
            Err(LinalgError::NotIntegerRing(_))
        ));
    }

    #[test]
    fn snf_textbook_times_two() {
        // 0 -> Z --x2--> Z -> 0 has homology Z/2 in degree zero.
        let m = SparseMatrix::from_rows(Z, &[&[2]]);
        let s = smith_normal_form(&m).unwrap();
        assert_eq!(s.torsion(), vec![BigInt::from(2)]);
    }

    #[test]
    fn tracked_span_solves() {
        let mut span = TrackedSpan::new(Q, 3);
        let v1 = SparseVec {
            dim: 3,
            entries: vec![(0, Q.from_i64(1)), (1, Q.from_i64(1))],
        };
        let v2 = SparseVec {
            dim: 3,
            entries: vec![(1, Q.from_i64(1)), (2, Q.from_i64(1))],
        };
        assert!(span.insert(v1.clone()));
        assert!(span.insert(v2.clone()));
        let mut v3 = v1.clone();
        v3.axpy(&Q.from_i64(2), &v2);
        assert!(!span.clone().insert(v3.clone()));
        let combo = span.solve(v3).unwrap();
        assert_eq!(combo.get(0).unwrap(), &Q.from_i64(1));
        assert_eq!(combo.get(1).unwrap(), &Q.from_i64(2));
        // something outside the span
        let w = SparseVec::unit(3, 0, Q);
        assert!(span.solve(w).is_none());
    }

    fn arb_matrix(ring: RingSpec) -> impl Strategy<Value = SparseMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(move |(r, c)| {
            proptest::collection::vec(-4i64..5, r * c).prop_map(move |vals| {
                let mut m = SparseMatrix::zero(ring, r, c);
                for (k, v) in vals.into_iter().enumerate() {
                    m.set(k / c, k % c, ring.from_i64(v));
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn rank_nullity_rationals(m in arb_matrix(RingSpec::Rationals)) {
            let rank = m.rank().unwrap();
            let nullity = m.kernel_basis().unwrap().len();
            prop_assert_eq!(rank + nullity, m.cols());
            // every kernel vector is annihilated
            for v in m.kernel_basis().unwrap() {
                prop_assert!(m.apply(&v).is_zero());
            }
        }

        #[test]
        fn rank_nullity_prime_field(m in arb_matrix(RingSpec::PrimeField(5))) {
            let rank = m.rank().unwrap();
            let nullity = m.kernel_basis().unwrap().len();
            prop_assert_eq!(rank + nullity, m.cols());
        }

        #[test]
        fn snf_divisibility_chain(m in arb_matrix(RingSpec::Integers)) {
            let s = smith_normal_form(&m).unwrap();
            let f = s.invariant_factors();
            for w in f.windows(2) {
                prop_assert!((&w[1] % &w[0]).is_zero());
            }
            for d in f {
                prop_assert!(d.is_positive());
            }
            prop_assert!(s.reproduces(&m));
        }

        #[test]
        fn snf_diag_divisible_pair(a in 1i64..20, k in 1i64..6) {
            let b = a * k;
            let m = SparseMatrix::from_rows(RingSpec::Integers, &[&[a, 0], &[0, b]]);
            let s = smith_normal_form(&m).unwrap();
            prop_assert_eq!(
                s.invariant_factors().to_vec(),
                vec![BigInt::from(a), BigInt::from(b)]
            );
        }

        #[test]
        fn modular_rank_matches_integer_rank_without_p_torsion(
            m in arb_matrix(RingSpec::Integers)
        ) {
            let p = 5u64;
            let s = smith_normal_form(&m).unwrap();
            let p_free = s
                .invariant_factors()
                .iter()
                .all(|d| !(d % BigInt::from(p)).is_zero());
            prop_assume!(p_free);
            // reduce mod p and over Q; ranks must agree
            let fp = RingSpec::PrimeField(p);
            let q = RingSpec::Rationals;
            let mut mp = SparseMatrix::zero(fp, m.rows(), m.cols());
            let mut mq = SparseMatrix::zero(q, m.rows(), m.cols());
            for (r, c, v) in m.iter() {
                let n = v.as_bigint().unwrap();
                mp.set(r, c, Scalar::from_bigint(fp, n));
                mq.set(r, c, Scalar::from_bigint(q, n));
            }
            prop_assert_eq!(mp.rank().unwrap(), mq.rank().unwrap());
        }
    }
}
