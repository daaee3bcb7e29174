//! Compressed sparse row matrices, reverse Cuthill-McKee ordering and an
//! envelope (skyline) Cholesky factorization.
//!
//! All finite element matrices on one mesh share a single sparsity pattern,
//! so affine combinations reduce to combinations of value arrays.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::local::LocalVector;

/// What an assembled matrix represents. Used for diagnostics only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixRole {
    Mass,
    Stiffness,
    Potential,
    ConstraintCross,
    Generic,
}

#[derive(Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }
}

/// CSR matrix whose pattern may be shared with other matrices.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
    role: MatrixRole,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        role: MatrixRole,
    ) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            pattern: Arc::new(SparsityPattern {
                nrows,
                ncols,
                row_ptr,
                col_idx,
            }),
            values,
            role,
        }
    }

    /// A matrix sharing `pattern` with the given values.
    pub fn with_pattern(pattern: Arc<SparsityPattern>, values: Vec<f64>, role: MatrixRole) -> Self {
        assert_eq!(pattern.nnz(), values.len());
        Self {
            pattern,
            values,
            role,
        }
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn role(&self) -> MatrixRole {
        self.role
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        (&self.pattern.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `(A x)_i` for a single row.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows());
        x.iter()
            .enumerate()
            .filter(|(_, xi)| **xi != 0.0)
            .map(|(i, xi)| xi * self.row_dot(i, y))
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `x^T A y` where `x` is supported on a subset of rows and `y_full` is
    /// a full-length vector.
    pub fn bilinear_local(&self, x: &LocalVector, y_full: &[f64]) -> f64 {
        x.iter().map(|(i, xi)| xi * self.row_dot(i, y_full)).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn scaled(&self, a: f64) -> SparseMatrix {
        SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
            role: self.role,
        }
    }

    /// `sum_t c_t A_t` over matrices that share this pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)], role: MatrixRole) -> SparseMatrix {
        let (_, first) = terms[0];
        let mut values = vec![0.0; first.nnz()];
        for &(c, m) in terms {
            assert!(m.same_pattern(first), "linear combination needs a shared pattern");
            if c == 0.0 {
                continue;
            }
            for (v, &a) in values.iter_mut().zip(&m.values) {
                *v += c * a;
            }
        }
        SparseMatrix {
            pattern: first.pattern.clone(),
            values,
            role,
        }
    }

    /// Adds `c * other` in place (shared pattern required).
    pub fn add_scaled(&mut self, c: f64, other: &SparseMatrix) {
        assert!(self.same_pattern(other));
        for (v, &a) in self.values.iter_mut().zip(&other.values) {
            *v += c * a;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((j, i, v));
            }
        }
        SparseMatrix::from_triplets(self.ncols(), self.nrows(), &trip, self.role)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &SparseMatrix, role: MatrixRole) -> SparseMatrix {
        assert_eq!(self.ncols(), other.nrows());
        let mut trip = Vec::new();
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (c2, v2) = other.row(k);
                for (&j, &b) in c2.iter().zip(v2) {
                    trip.push((i, j, a * b));
                }
            }
        }
        SparseMatrix::from_triplets(self.nrows(), other.ncols(), &trip, role)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows(), self.ncols());
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|` relative to the largest `|A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric graph of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let neighbours = |i: usize| a.row(i).0.iter().copied().filter(move |&j| j != i);
    let degree: Vec<usize> = (0..n).map(|i| neighbours(i).count()).collect();

    let bfs_levels = |start: usize, visited: &[bool]| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        let mut depth = 0;
        while let Some(v) = queue.pop_front() {
            last = v;
            depth = level[v];
            for w in neighbours(v) {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        // among the deepest level pick the node of minimal degree
        let far = (0..n)
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(last);
        (level, far)
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut levels, mut far) = bfs_levels(start, &visited);
        let mut ecc = levels.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        for _ in 0..8 {
            let (l2, f2) = bfs_levels(far, &visited);
            let e2 = l2.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
            if e2 <= ecc {
                break;
            }
            start = far;
            levels = l2;
            far = f2;
            ecc = e2;
        }
        let _ = levels;
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbours(v).filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `P A P^T = L L^T` of a symmetric positive
/// definite sparse matrix, with rows of `L` stored contiguously from their
/// first nonzero column.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a` using a reverse Cuthill-McKee ordering.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for new in 0..n {
            for &old_j in a.row(perm[new]).0 {
                let j = inv[old_j];
                if j < first[new] {
                    first[new] = j;
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for new in 0..n {
            let (cols, vals) = a.row(perm[new]);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                if j <= new {
                    values[offset[new] + j - first[new]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = values.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offset[j]..offset[j] + (j - fj + 1)];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: perm[i],
                    value: d,
                });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self {
            n,
            perm,
            inv,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.offset[i]..self.offset[i + 1]]
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.solve_many(&[b], std::slice::from_mut(&mut out.as_mut_slice()));
        out
    }

    /// Solves `A X = B` column by column, sharing passes over the factor.
    pub fn solve_many(&self, rhs: &[&[f64]], out: &mut [&mut [f64]]) {
        assert_eq!(rhs.len(), out.len());
        const BLOCK: usize = 8;
        for (rb, ob) in rhs.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
            self.solve_block(rb, ob);
        }
    }

    fn solve_block(&self, rhs: &[&[f64]], out: &mut [&mut [f64]]) {
        let n = self.n;
        let mut work: Vec<Vec<f64>> = rhs
            .iter()
            .map(|b| {
                assert_eq!(b.len(), n);
                (0..n).map(|i| b[self.perm[i]]).collect()
            })
            .collect();
        // leading zeros stay zero in the forward solve
        let starts: Vec<usize> = work
            .iter()
            .map(|y| y.iter().position(|&v| v != 0.0).unwrap_or(n))
            .collect();
        let start = starts.iter().copied().min().unwrap_or(0);
        for i in start..n {
            let fi = self.first[i];
            let row = self.row(i);
            let lii = row[i - fi];
            for (y, &sy) in work.iter_mut().zip(&starts) {
                if i < sy {
                    continue;
                }
                let k0 = fi.max(sy);
                let s = dot(&row[k0 - fi..i - fi], &y[k0..i]);
                y[i] = (y[i] - s) / lii;
            }
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let lii = row[i - fi];
            for y in work.iter_mut() {
                let xi = y[i] / lii;
                y[i] = xi;
                if xi != 0.0 {
                    for (yk, &l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                        *yk -= l * xi;
                    }
                }
            }
        }
        for (y, o) in work.iter().zip(out.iter_mut()) {
            for (old, oi) in o.iter_mut().enumerate() {
                *oi = y[self.inv[old]];
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorise the loop
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_cycle(n: usize, shift: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            t.push((i, (i + 1) % n, -1.0));
            t.push(((i + 1) % n, i, -1.0));
        }
        SparseMatrix::from_triplets(n, n, &t, MatrixRole::Generic)
    }

    fn torus(nx: usize, shift: f64) -> SparseMatrix {
        let id = |i: usize, j: usize| (j % nx) * nx + i % nx;
        let mut t = Vec::new();
        for j in 0..nx {
            for i in 0..nx {
                let a = id(i, j);
                t.push((a, a, 6.0 + shift));
                for b in [id(i + 1, j), id(i, j + 1), id(i + 1, j + 1)] {
                    t.push((a, b, -1.0));
                    t.push((b, a, -1.0));
                }
            }
        }
        SparseMatrix::from_triplets(nx * nx, nx * nx, &t, MatrixRole::Generic)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (0, 0, 3.0)],
            MatrixRole::Generic,
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![6.0, 6.0]);
        assert_eq!(m.transpose().get(2, 1), 2.0);
    }

    #[test]
    fn rcm_keeps_cycle_bandwidth_small() {
        let a = laplace_cycle(50, 0.1);
        let perm = reverse_cuthill_mckee(&a);
        let mut inv = vec![0; 50];
        for (n, &o) in perm.iter().enumerate() {
            inv[o] = n;
        }
        let bw = (0..50)
            .flat_map(|i| a.row(i).0.iter().map(move |&j| (i, j)).collect::<Vec<_>>())
            .map(|(i, j)| inv[i].abs_diff(inv[j]))
            .max()
            .unwrap();
        assert!(bw <= 2, "bandwidth {bw}");
    }

    #[test]
    fn skyline_solves_periodic_systems() {
        for a in [laplace_cycle(37, 0.05), torus(9, 0.3)] {
            let n = a.nrows();
            let chol = SkylineCholesky::factor(&a).unwrap();
            let x: Vec<f64> = (0..n).map(|i| ((i * 13 % 7) as f64 - 3.0) / 3.0).collect();
            let b = a.matvec(&x);
            let y = chol.solve(&b);
            let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "error {err}");
        }
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let a = laplace_cycle(10, -0.5);
        assert!(matches!(
            SkylineCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn solve_many_matches_single() {
        let a = torus(6, 1.0);
        let chol = SkylineCholesky::factor(&a).unwrap();
        let rhs: Vec<Vec<f64>> = (0..11)
            .map(|r| (0..36).map(|i| if i == r { 1.0 } else { 0.0 }).collect())
            .collect();
        let refs: Vec<&[f64]> = rhs.iter().map(|v| v.as_slice()).collect();
        let mut outs = vec![vec![0.0; 36]; 11];
        let mut out_refs: Vec<&mut [f64]> = outs.iter_mut().map(|v| v.as_mut_slice()).collect();
        chol.solve_many(&refs, &mut out_refs);
        for (b, x) in rhs.iter().zip(&outs) {
            let single = chol.solve(b);
            assert_eq!(&single, x);
        }
    }
}
