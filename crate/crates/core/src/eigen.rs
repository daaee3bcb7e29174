//! Symmetric-definite generalized eigenproblems `A u = lambda M u`.
//!
//! Dense path: Cholesky of `M` plus a symmetric standard eigensolve.
//! Sparse path: block Krylov-Schur on `(A - sigma M)^{-1} M`, which is
//! self-adjoint in the `M` inner product, with full reorthogonalization and
//! thick restarts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::{dot, SkylineCholesky, SparseMatrix};

/// Eigenpairs in ascending order with `u_i^T M u_j = delta_ij`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `k` smallest eigenpairs of a dense symmetric pencil `(A, M)`, `M` SPD.
pub fn dense_gevp(a: &DMatrix<f64>, m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} pencil"
        )));
    }
    let sym_m = 0.5 * (m + m.transpose());
    let chol = sym_m.clone().cholesky().ok_or_else(|| {
        let (pivot, value) = (0..n)
            .map(|i| (i, sym_m[(i, i)]))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        Error::NotPositiveDefinite { pivot, value }
    })?;
    let l = chol.l();
    // C = L^-1 A L^-T
    let la = l
        .solve_lower_triangular(a)
        .expect("cholesky factor has a positive diagonal");
    let c = l
        .solve_lower_triangular(&la.transpose())
        .expect("cholesky factor has a positive diagonal");
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let y: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        let u = lt
            .solve_upper_triangular(&y)
            .expect("cholesky factor has a positive diagonal");
        values.push(eig.eigenvalues[i]);
        vectors.push(u.as_slice().to_vec());
    }
    let mut pairs = EigenPairs { values, vectors };
    gauge_with(&mut pairs, |u| (m * DVector::from_column_slice(u)).as_slice().to_vec());
    Ok(pairs)
}

/// Options for [`sparse_smallest_gevp`].
#[derive(Clone, Debug)]
pub struct SparseEigOptions {
    /// Relative residual tolerance on the Ritz pairs of the shifted operator.
    pub tol: f64,
    /// Shift `sigma`; `A - sigma M` must be positive definite.
    pub shift: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SparseEigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            shift: 0.0,
            max_restarts: 500,
            seed: 0x5eed,
        }
    }
}

struct Basis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    opv: Vec<Vec<f64>>,
}

/// `k` smallest eigenpairs of a sparse symmetric pencil `(A, M)`.
pub fn sparse_smallest_gevp(
    a: &SparseMatrix,
    m: &SparseMatrix,
    k: usize,
    opts: &SparseEigOptions,
) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a problem with {n} unknowns"
        )));
    }
    let b = 2.max(k.min(4));
    let mmax = (2 * k + 4).max(20).max(3 * b + k);
    if n <= mmax + b {
        return dense_gevp(&a.to_dense(), &m.to_dense(), k);
    }
    let shifted = if opts.shift == 0.0 {
        a.clone()
    } else {
        let mut s = a.clone();
        if s.same_pattern(m) {
            s.add_scaled(-opts.shift, m);
            s
        } else {
            SparseMatrix::linear_combination(&[(1.0, a), (-opts.shift, m)], a.role())
        }
    };
    let factor = SkylineCholesky::factor(&shifted)?;
    let keep = (k + 1).max((mmax - b) / 2);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis {
        v: Vec::with_capacity(mmax + b),
        mv: Vec::with_capacity(mmax + b),
        opv: Vec::with_capacity(mmax + b),
    };
    let mut pending: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();

    for restart in 0..opts.max_restarts {
        // expand until the basis is full
        while basis.v.len() + b <= mmax {
            let block = orthonormalize_block(m, &basis, std::mem::take(&mut pending), &mut rng);
            let mvs: Vec<Vec<f64>> = block.iter().map(|x| m.matvec(x)).collect();
            let mut ops = vec![vec![0.0; n]; block.len()];
            {
                let rhs: Vec<&[f64]> = mvs.iter().map(|x| x.as_slice()).collect();
                let mut out: Vec<&mut [f64]> = ops.iter_mut().map(|x| x.as_mut_slice()).collect();
                factor.solve_many(&rhs, &mut out);
            }
            basis.v.extend(block);
            basis.mv.extend(mvs);
            pending = ops.clone();
            basis.opv.extend(ops);
        }

        // Rayleigh-Ritz: T = V^T M Op V = (MV)^T (OpV)
        let dim = basis.v.len();
        let mut t = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let x = 0.5 * (dot(&basis.mv[i], &basis.opv[j]) + dot(&basis.mv[j], &basis.opv[i]));
                t[(i, j)] = x;
                t[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let combine = |cols: &[Vec<f64>], y: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (c, &w) in cols.iter().zip(y) {
                if w != 0.0 {
                    for (o, x) in out.iter_mut().zip(c) {
                        *o += w * x;
                    }
                }
            }
            out
        };

        let ritz: Vec<usize> = order.iter().copied().take(keep).collect();
        let coeffs: Vec<Vec<f64>> = ritz
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        let thetas: Vec<f64> = ritz.iter().map(|&i| eig.eigenvalues[i]).collect();

        let new_v: Vec<Vec<f64>> = coeffs.iter().map(|y| combine(&basis.v, y)).collect();
        let new_mv: Vec<Vec<f64>> = coeffs.iter().map(|y| combine(&basis.mv, y)).collect();
        let new_opv: Vec<Vec<f64>> = coeffs.iter().map(|y| combine(&basis.opv, y)).collect();

        // residuals r = Op x - theta x
        let residuals: Vec<Vec<f64>> = (0..keep)
            .map(|i| {
                new_opv[i]
                    .iter()
                    .zip(&new_v[i])
                    .map(|(o, x)| o - thetas[i] * x)
                    .collect()
            })
            .collect();
        let mut converged = 0;
        let mut unconverged = Vec::new();
        for i in 0..keep {
            let r = &residuals[i];
            let rn = m.quad_form(r).max(0.0).sqrt();
            if rn <= opts.tol * thetas[i].abs() {
                if i == converged {
                    converged += 1;
                }
            } else {
                unconverged.push(i);
            }
        }
        if converged >= k {
            let mut values = Vec::with_capacity(k);
            let mut vectors = Vec::with_capacity(k);
            for x in new_v.into_iter().take(k) {
                let mx = m.matvec(&x);
                let nrm = dot(&x, &mx).sqrt();
                let x: Vec<f64> = x.iter().map(|v| v / nrm).collect();
                values.push(a.quad_form(&x));
                vectors.push(x);
            }
            let mut idx: Vec<usize> = (0..k).collect();
            idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
            let mut pairs = EigenPairs {
                values: idx.iter().map(|&i| values[i]).collect(),
                vectors: idx.iter().map(|&i| vectors[i].clone()).collect(),
            };
            fix_gauge(&mut pairs, m);
            log::debug!("sparse eigensolve: {k} pairs after {restart} restarts (n = {n})");
            return Ok(pairs);
        }

        basis = Basis {
            v: new_v,
            mv: new_mv,
            opv: new_opv,
        };
        // continue the Krylov sequence from the residuals of the wanted pairs
        pending = unconverged
            .iter()
            .take(b)
            .map(|&i| residuals[i].clone())
            .collect();
        let mut extra = 0;
        while pending.len() < b {
            // residual of an already converged pair is tiny; pad with the next ones
            let i = keep.min(residuals.len()) - 1 - extra.min(keep - 1);
            pending.push(residuals[i].clone());
            extra += 1;
        }
        if restart + 1 == opts.max_restarts {
            return Err(Error::NoConvergence {
                iterations: opts.max_restarts,
                converged,
                wanted: k,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_restarts,
        converged: 0,
        wanted: k,
    })
}

/// `M`-orthonormalizes `block` against `basis.v` and itself; directions that
/// vanish are replaced by random vectors.
fn orthonormalize_block(
    m: &SparseMatrix,
    basis: &Basis,
    block: Vec<Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = m.nrows();
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    let mut done_m: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut w in block {
        let mut attempts = 0;
        loop {
            let before = m.quad_form(&w).max(0.0).sqrt();
            for _ in 0..2 {
                for (v, mv) in basis.v.iter().zip(&basis.mv).chain(done.iter().zip(&done_m)) {
                    let c = dot(mv, &w);
                    for (x, y) in w.iter_mut().zip(v) {
                        *x -= c * y;
                    }
                }
            }
            let mw = m.matvec(&w);
            let nrm = dot(&w, &mw).max(0.0).sqrt();
            if nrm > 1e-10 * before && nrm > 0.0 && nrm.is_finite() {
                w.iter_mut().for_each(|x| *x /= nrm);
                done_m.push(mw.into_iter().map(|x| x / nrm).collect());
                done.push(w);
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "cannot extend the Krylov basis");
            w = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        }
    }
    done
}

/// Sign convention: the `M`-weighted mean `sum_i (M u)_i` is made positive;
/// when it vanishes, the first significant nodal value is made positive.
pub fn fix_gauge(pairs: &mut EigenPairs, m: &SparseMatrix) {
    gauge_with(pairs, |u| m.matvec(u));
}

fn gauge_with(pairs: &mut EigenPairs, apply_m: impl Fn(&[f64]) -> Vec<f64>) {
    for u in pairs.vectors.iter_mut() {
        if gauge_sign(u, &apply_m(u)) < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `+1` or `-1`: the factor that brings `u` into the gauge.
pub fn gauge_sign(u: &[f64], mu: &[f64]) -> f64 {
    let mean: f64 = mu.iter().sum();
    let scale: f64 = mu.iter().map(|x| x.abs()).sum();
    if mean.abs() > 1e-10 * scale {
        return mean.signum();
    }
    let umax = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    u.iter()
        .find(|x| x.abs() > 1e-8 * umax)
        .map_or(1.0, |x| x.signum())
}

/// Residual `||A u - lambda M u|| / ||A u||` (Euclidean).
pub fn relative_residual(a: &SparseMatrix, m: &SparseMatrix, lambda: f64, u: &[f64]) -> f64 {
    let au = a.matvec(u);
    let mu = m.matvec(u);
    let r: f64 = au
        .iter()
        .zip(&mu)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt();
    r / dot(&au, &au).sqrt().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{affine_operator, assemble_mass, assemble_stiffness};
    use crate::mesh::{BoxDomain, FeSpace};
    use crate::potential::{BasePotential, RandomPotentialSpec};
    use crate::sparse::MatrixRole;

    #[test]
    fn dense_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
        let m = DMatrix::identity(2, 2);
        let p = dense_gevp(&a, &m, 2).unwrap();
        assert_eq!(p.values, vec![2.0, 3.0]);
        let p = dense_gevp(&m, &m, 2).unwrap();
        assert!(p.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(dense_gevp(&a, &m, 3).is_err());
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            dense_gevp(&a, &bad, 1),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    /// Number of eigenvalues below `x`: negative pivots of `A - x M` (Sylvester).
    fn count_below(a: &DMatrix<f64>, m: &DMatrix<f64>, x: f64) -> usize {
        let mut s = a - m * x;
        let n = s.nrows();
        let mut neg = 0;
        for k in 0..n {
            let p = s[(k, k)];
            if p < 0.0 {
                neg += 1;
            }
            for i in k + 1..n {
                let f = s[(i, k)] / p;
                for j in k + 1..n {
                    s[(i, j)] -= f * s[(k, j)];
                }
            }
        }
        neg
    }

    #[test]
    fn dense_matches_inertia_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let r = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
            let q = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
            let a = &r * r.transpose() + DMatrix::identity(6, 6) * 0.1;
            let m = &q * q.transpose() + DMatrix::identity(6, 6);
            let p = dense_gevp(&a, &m, 6).unwrap();
            for (i, &lam) in p.values.iter().enumerate() {
                let (mut lo, mut hi) = (-1.0, 100.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(&a, &m, mid) > i {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                assert!((lam - 0.5 * (lo + hi)).abs() < 1e-10 * lam.abs().max(1.0));
            }
            for i in 0..6 {
                for j in 0..6 {
                    let u = DVector::from_column_slice(&p.vectors[i]);
                    let v = DVector::from_column_slice(&p.vectors[j]);
                    let g = (u.transpose() * &m * v)[(0, 0)];
                    assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
        }
    }

    fn constant_v(n: usize, v: f64, eps: f64) -> (SparseMatrix, SparseMatrix) {
        let sp = FeSpace::uniform(&BoxDomain::interval(0.0, 1.0), &[n]).unwrap();
        let op = affine_operator(
            &RandomPotentialSpec::deterministic(BasePotential::Constant { value: v }),
            &sp,
            eps,
        );
        (op.base, op.mass)
    }

    #[test]
    fn sparse_constant_potential_spectrum() {
        let (a, m) = constant_v(512, 1.0, 1.0);
        let p = sparse_smallest_gevp(&a, &m, 3, &SparseEigOptions::default()).unwrap();
        assert!((p.values[0] - 1.0).abs() < 1e-10);
        let exact = 1.0 + 0.5 * (2.0 * std::f64::consts::PI).powi(2);
        for v in &p.values[1..] {
            assert!((v - exact).abs() / exact < 1e-4);
        }
        assert!((p.values[1] - p.values[2]).abs() < 1e-9);
        // ground state constant with positive sign
        assert!(p.vectors[0].iter().all(|&x| (x - 1.0).abs() < 1e-8));
        for i in 0..3 {
            assert!(relative_residual(&a, &m, p.values[i], &p.vectors[i]) < 1e-8);
        }
    }

    #[test]
    fn sparse_matches_dense() {
        let sp = FeSpace::uniform(&BoxDomain::interval(-1.0, 1.0), &[96]).unwrap();
        let spec = RandomPotentialSpec::rational_1d(5, 1.0);
        let op = affine_operator(&spec, &sp, 0.3);
        let g = op.materialize(&[0.4, -0.3, 0.2, 0.5, -0.5]).unwrap();
        let d = dense_gevp(&g.to_dense(), &op.mass.to_dense(), 5).unwrap();
        let s = sparse_smallest_gevp(&g, &op.mass, 5, &SparseEigOptions::default()).unwrap();
        for i in 0..5 {
            assert!((d.values[i] - s.values[i]).abs() < 1e-9 * d.values[i].abs().max(1.0));
            let diff: f64 = d.vectors[i]
                .iter()
                .zip(&s.vectors[i])
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-6, "vector {i} differs by {diff}");
        }
    }

    #[test]
    fn sparse_2d_and_shift() {
        let sp = FeSpace::uniform(&BoxDomain::square(0.0, 1.0), &[24, 24]).unwrap();
        let s = assemble_stiffness(&sp);
        let m = assemble_mass(&sp);
        let shifted = SparseMatrix::linear_combination(&[(0.5, &s), (2.0, &m)], MatrixRole::Generic);
        let p = sparse_smallest_gevp(&shifted, &m, 5, &SparseEigOptions::default()).unwrap();
        // negative potential with a shift below the spectrum
        let neg = SparseMatrix::linear_combination(&[(0.5, &s), (-3.0, &m)], MatrixRole::Generic);
        let opts = SparseEigOptions {
            shift: -4.0,
            ..Default::default()
        };
        let q = sparse_smallest_gevp(&neg, &m, 5, &opts).unwrap();
        for i in 0..5 {
            assert!((p.values[i] - 5.0 - q.values[i]).abs() < 1e-9);
        }
        assert!(matches!(
            sparse_smallest_gevp(&neg, &m, 5, &SparseEigOptions::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn gauge_rules() {
        let m = assemble_mass(&FeSpace::uniform(&BoxDomain::interval(0.0, 1.0), &[4]).unwrap());
        let mut p = EigenPairs {
            values: vec![0.0; 3],
            vectors: vec![
                vec![-1.0, -1.0, -0.5, -1.0],
                vec![1.0, 1.0, 0.5, 1.0],
                vec![0.0, -1.0, 0.0, 1.0],
            ],
        };
        fix_gauge(&mut p, &m);
        assert_eq!(p.vectors[0], vec![1.0, 1.0, 0.5, 1.0]);
        assert_eq!(p.vectors[1], vec![1.0, 1.0, 0.5, 1.0]);
        assert_eq!(p.vectors[2], vec![0.0, 1.0, 0.0, -1.0]);
    }
}
