//! Multiscale basis from the constrained energy minimization
//! `min phi^T G phi` subject to `A phi = alpha_i e_i`, the Galerkin eigenproblem
//! in its span, and order fits for convergence studies.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{constraint_alpha, constraint_cross, AffineOperator};
use crate::eigen::{dense_gevp, gauge_sign, EigenPairs};
use crate::error::{Error, Result};
use crate::local::{LocalVector, Support};
use crate::mesh::NestingMap;
use crate::sparse::{SkylineCholesky, SparseMatrix};

/// Coarse/fine constraint data shared by every basis build on one mesh pair.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub nesting: NestingMap,
    /// `A_ij = (phi_i^H, phi_j^h)`, `N_H x N_h`.
    pub cross: SparseMatrix,
    pub alpha: Vec<f64>,
    /// Per-node fine supports when basis functions are truncated.
    pub patches: Option<Vec<Arc<[usize]>>>,
}

impl Constraint {
    pub fn new(nesting: &NestingMap, fine_mass: &SparseMatrix) -> Result<Self> {
        let cross = constraint_cross(fine_mass, nesting)?;
        let alpha = constraint_alpha(&cross);
        Ok(Self {
            nesting: nesting.clone(),
            cross,
            alpha,
            patches: None,
        })
    }

    /// Truncates every basis function to its hat support grown by `layers`
    /// coarse rings.
    pub fn with_truncation(mut self, layers: usize) -> Self {
        let n = self.coarse_dofs();
        self.patches = Some(
            (0..n)
                .into_par_iter()
                .map(|i| Arc::from(self.nesting.patch(i, layers)))
                .collect(),
        );
        self
    }

    pub fn coarse_dofs(&self) -> usize {
        self.cross.nrows()
    }

    pub fn fine_dofs(&self) -> usize {
        self.cross.ncols()
    }

    pub fn support(&self, i: usize) -> Support {
        match &self.patches {
            Some(p) => Support::Patch(p[i].clone()),
            None => Support::Full(self.fine_dofs()),
        }
    }
}

/// `M`-orthogonal projection onto `ker A`: `v - P M_H^-1 A v`, with `P` the
/// coarse-to-fine prolongation and `M_H = A P` the coarse mass.
#[derive(Clone, Debug)]
pub struct NullProjector {
    prolongation: SparseMatrix,
    cross: SparseMatrix,
    coarse_mass: SkylineCholesky,
}

impl NullProjector {
    pub fn new(constraint: &Constraint) -> Result<Self> {
        let prolongation = crate::assembly::prolongation(&constraint.nesting);
        let coarse_mass = constraint
            .cross
            .mul(&prolongation, crate::sparse::MatrixRole::Mass);
        Ok(Self {
            coarse_mass: SkylineCholesky::factor(&coarse_mass)?,
            prolongation,
            cross: constraint.cross.clone(),
        })
    }

    /// Projects a full-length vector in place.
    pub fn apply(&self, v: &mut [f64]) {
        let c = self.coarse_mass.solve(&self.cross.matvec(v));
        for (vi, pc) in v.iter_mut().zip(self.prolongation.matvec(&c)) {
            *vi -= pc;
        }
    }
}

/// Multiscale basis: column `i` holds the fine coefficients of `phi_i`.
#[derive(Clone, Debug)]
pub struct MultiscaleBasis {
    pub columns: Vec<LocalVector>,
    pub alpha: Vec<f64>,
    /// Sample the basis was built for; `None` for a deterministic potential.
    pub omega: Option<Vec<f64>>,
}

impl MultiscaleBasis {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `max_ij |(A C)_ij - alpha_i delta_ij| / max alpha`.
    pub fn constraint_residual(&self, constraint: &Constraint) -> f64 {
        let n = constraint.fine_dofs();
        let amax = self.alpha.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut worst = 0.0f64;
        for (j, c) in self.columns.iter().enumerate() {
            let ac = constraint.cross.matvec(&c.to_full(n));
            for (i, v) in ac.iter().enumerate() {
                let target = if i == j { self.alpha[i] } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst / amax
    }
}

/// Builds the basis for `G(w)` of the affine operator.
pub fn build_basis(op: &AffineOperator, omega: &[f64], constraint: &Constraint) -> Result<MultiscaleBasis> {
    let g = op.materialize(omega)?;
    let mut basis = build_basis_for(&g, constraint)?;
    if !omega.is_empty() {
        basis.omega = Some(omega.to_vec());
    }
    Ok(basis)
}

/// `C = G^-1 A^T (A G^-1 A^T)^-1 diag(alpha)` from one factorization of `G`.
pub fn build_basis_for(g: &SparseMatrix, constraint: &Constraint) -> Result<MultiscaleBasis> {
    let (nc, nf) = (constraint.coarse_dofs(), constraint.fine_dofs());
    if g.nrows() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: g.nrows(),
        });
    }
    let factor = SkylineCholesky::factor(g)?;
    let a = &constraint.cross;

    // Y = G^-1 A^T, column-major N_h x N_H
    let mut y = DMatrix::<f64>::zeros(nf, nc);
    const CHUNK: usize = 8;
    y.as_mut_slice()
        .par_chunks_mut(nf * CHUNK)
        .enumerate()
        .for_each(|(chunk, block)| {
            let first = chunk * CHUNK;
            let cols = block.len() / nf;
            let rhs: Vec<Vec<f64>> = (first..first + cols)
                .map(|i| {
                    let mut r = vec![0.0; nf];
                    let (idx, vals) = a.row(i);
                    for (&k, &v) in idx.iter().zip(vals) {
                        r[k] = v;
                    }
                    r
                })
                .collect();
            let rhs_refs: Vec<&[f64]> = rhs.iter().map(|r| r.as_slice()).collect();
            let mut out: Vec<&mut [f64]> = block.chunks_mut(nf).collect();
            factor.solve_many(&rhs_refs, &mut out);
        });

    // Schur matrix S = A Y
    let mut s = DMatrix::<f64>::zeros(nc, nc);
    for j in 0..nc {
        let yj = y.column(j);
        let yj = yj.as_slice();
        for i in 0..nc {
            s[(i, j)] = a.row_dot(i, yj);
        }
    }
    let s = 0.5 * (&s + s.transpose());
    let chol = s.cholesky().ok_or(Error::SingularSchur)?;
    let w = chol.solve(&DMatrix::from_diagonal(&DVector::from_column_slice(&constraint.alpha)));
    let c = &y * w;
    drop(y);

    let columns = (0..nc)
        .map(|i| LocalVector::gather(constraint.support(i), c.column(i).as_slice()))
        .collect();
    Ok(MultiscaleBasis {
        columns,
        alpha: constraint.alpha.clone(),
        omega: None,
    })
}

/// Galerkin eigenpairs in the span of a set of fine-mesh columns.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    /// Eigenvalues and `M`-normalized, gauge-fixed fine vectors.
    pub pairs: EigenPairs,
    /// Coefficients of each eigenvector in the column basis.
    pub coarse: Vec<Vec<f64>>,
}

/// Projected matrices `(C^T G C, C^T M C)`.
pub fn project(columns: &[LocalVector], g: &SparseMatrix, m: &SparseMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = columns.len();
    if n > 0 && columns.iter().all(|c| matches!(c.support(), Support::Full(_))) {
        return project_dense(columns, g, m);
    }
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let gc = apply_local(g, &columns[j]);
            let mc = apply_local(m, &columns[j]);
            let gr = columns.iter().map(|ci| ci.dot_full(&gc)).collect();
            let mr = columns.iter().map(|ci| ci.dot_full(&mc)).collect();
            (gr, mr)
        })
        .collect();
    let mut gh = DMatrix::zeros(n, n);
    let mut mh = DMatrix::zeros(n, n);
    for (j, (gr, mr)) in rows.iter().enumerate() {
        for i in 0..n {
            gh[(i, j)] = gr[i];
            mh[(i, j)] = mr[i];
        }
    }
    (0.5 * (&gh + gh.transpose()), 0.5 * (&mh + mh.transpose()))
}

/// Full-support columns: `C^T (G C)` as one dense product.
fn project_dense(columns: &[LocalVector], g: &SparseMatrix, m: &SparseMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let nf = g.nrows();
    let n = columns.len();
    let c = DMatrix::from_fn(nf, n, |i, j| columns[j].values()[i]);
    let mut gc = DMatrix::<f64>::zeros(nf, n);
    let mut mc = DMatrix::<f64>::zeros(nf, n);
    gc.as_mut_slice()
        .par_chunks_mut(nf)
        .zip(mc.as_mut_slice().par_chunks_mut(nf))
        .enumerate()
        .for_each(|(j, (gj, mj))| {
            let cj = columns[j].values();
            g.matvec_into(cj, gj);
            m.matvec_into(cj, mj);
        });
    // explicit transpose routes through the blocked gemm kernel
    let ct = c.transpose();
    let gh = &ct * gc;
    let mh = &ct * mc;
    (0.5 * (&gh + gh.transpose()), 0.5 * (&mh + mh.transpose()))
}

/// `A x` for symmetric `A` and a local `x` (uses rows of `A` as columns).
fn apply_local(a: &SparseMatrix, x: &LocalVector) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for (k, v) in x.iter() {
        if v == 0.0 {
            continue;
        }
        let (cols, vals) = a.row(k);
        for (&j, &ajk) in cols.iter().zip(vals) {
            out[j] += ajk * v;
        }
    }
    out
}

/// Solves `(C^T G C) u = lambda (C^T M C) u` and prolongs to the fine mesh.
pub fn reduced_evp(columns: &[LocalVector], g: &SparseMatrix, m: &SparseMatrix, k: usize) -> Result<ReducedSolution> {
    let (gh, mh) = project(columns, g, m);
    let red = dense_gevp(&gh, &mh, k)?;
    let nf = m.nrows();
    let mut pairs = EigenPairs::default();
    let mut coarse = Vec::with_capacity(k);
    for (lam, mut coef) in red.values.into_iter().zip(red.vectors) {
        let mut u = vec![0.0; nf];
        for (c, &w) in columns.iter().zip(&coef) {
            if w != 0.0 {
                for (i, v) in c.iter() {
                    u[i] += w * v;
                }
            }
        }
        let mu = m.matvec(&u);
        let nrm = crate::sparse::dot(&u, &mu).sqrt();
        let sign = gauge_sign(&u, &mu) / nrm;
        u.iter_mut().for_each(|x| *x *= sign);
        coef.iter_mut().for_each(|x| *x *= sign);
        pairs.values.push(lam);
        pairs.vectors.push(u);
        coarse.push(coef);
    }
    Ok(ReducedSolution { pairs, coarse })
}

/// Least-squares fit of `log(error) = slope * log(n) + intercept`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Resolutions that entered the fit.
    pub used: Vec<f64>,
    /// Local orders between consecutive usable levels.
    pub ratios: Vec<f64>,
}

/// Errors below this are treated as saturated and excluded from fits.
pub const ORDER_FLOOR: f64 = 1e-12;

/// Fits the convergence order of `errors` against the resolution `n`
/// (e.g. coarse cells per axis). Convergent data gives a negative slope.
pub fn fit_order(n: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if n.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            got: errors.len(),
        });
    }
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(errors)
        .filter(|(&x, &e)| x > 0.0 && e.is_finite() && e.abs() >= ORDER_FLOOR)
        .map(|(&x, &e)| (x.ln(), e.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "order fit needs at least 3 levels above {ORDER_FLOOR:e}, got {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ratios = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    Ok(OrderFit {
        slope,
        intercept: my - slope * mx,
        used: pts.iter().map(|p| p.0.exp()).collect(),
        ratios,
    })
}

/// `max |phi_i|` over fine nodes at coarse distance `>= distance` from node
/// `i`, relative to `max |phi_i|`.
pub fn decay_ratio(column: &LocalVector, nesting: &NestingMap, i: usize, distance: f64) -> f64 {
    let peak = column.max_abs();
    let far = column
        .iter()
        .filter(|&(k, _)| nesting.coarse_distance(i, k) >= distance)
        .fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    far / peak
}
