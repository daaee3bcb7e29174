//! Proper orthogonal decomposition of multiscale basis snapshots.
//!
//! Offline: per coarse node, the snapshots `phi_i(w^1..w^Q)` are centered at
//! their mean `zeta^0` and compressed to `m_i` L2-orthonormal modes. Online:
//! the constraint fixes the coefficient of `zeta^0` to one, leaving an
//! `m_i x m_i` SPD system per node.

pub mod io;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::AffineOperator;
use crate::error::{Error, Result};
use crate::local::{LocalVector, Support};
use crate::msfem::{build_basis, Constraint, NullProjector};
use crate::sparse::{dot, SparseMatrix};

/// Snapshots of one basis function, stored on a common support.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    pub node: usize,
    pub support: Support,
    /// `Q` snapshots, each of length `support.len()`.
    pub snapshots: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Builds the multiscale basis for every sample and regroups the columns by
/// coarse node.
pub fn collect_snapshots(
    op: &AffineOperator,
    constraint: &Constraint,
    samples: &[Vec<f64>],
) -> Result<Vec<SnapshotSet>> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "POD needs at least 2 snapshots, got {}",
            samples.len()
        )));
    }
    let bases = samples
        .par_iter()
        .map(|w| build_basis(op, w, constraint))
        .collect::<Result<Vec<_>>>()?;
    let nc = constraint.coarse_dofs();
    let mut sets: Vec<SnapshotSet> = (0..nc)
        .map(|i| SnapshotSet {
            node: i,
            support: constraint.support(i),
            snapshots: Vec::with_capacity(samples.len()),
        })
        .collect();
    for basis in bases {
        for (set, col) in sets.iter_mut().zip(basis.columns) {
            set.snapshots.push(col.values().to_vec());
        }
    }
    Ok(sets)
}

/// Rank selection for [`pod_reduce`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodOptions {
    /// Fixed number of modes per node; takes precedence over `rho`.
    pub modes: Option<usize>,
    /// Tail tolerance: smallest `l` with `sum_{k>l} sigma_k / sum sigma_k < rho`.
    pub rho: Option<f64>,
}

impl Default for PodOptions {
    fn default() -> Self {
        Self {
            modes: Some(3),
            rho: None,
        }
    }
}

/// Relative size below which correlation eigenvalues count as zero.
const RANK_TOL: f64 = 1e-13;

/// POD basis of one node.
#[derive(Clone, Debug)]
pub struct PodBasis {
    pub node: usize,
    pub support: Support,
    /// Snapshot mean `zeta^0` on the support.
    pub zeta0: Vec<f64>,
    /// Modes `zeta^1..zeta^m` on the support, L2-orthonormal.
    pub modes: Vec<Vec<f64>>,
    /// Full correlation spectrum, descending.
    pub sigma: Vec<f64>,
    pub rho: Option<f64>,
    pub q: usize,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    /// `k`-th basis vector (`0` is the mean) as a local vector.
    pub fn vector(&self, k: usize) -> LocalVector {
        let v = if k == 0 { &self.zeta0 } else { &self.modes[k - 1] };
        local_from(&self.support, v.clone())
    }
}

fn local_from(support: &Support, values: Vec<f64>) -> LocalVector {
    let mut lv = LocalVector::zeros(support.clone());
    lv.values_mut().copy_from_slice(&values);
    lv
}

/// `M x` restricted to the support of `x`.
fn mass_on_support(m: &SparseMatrix, support: &Support, x: &[f64]) -> Vec<f64> {
    match support {
        Support::Full(_) => m.matvec(x),
        Support::Patch(idx) => {
            let mut full = vec![0.0; m.nrows()];
            for (&i, &v) in idx.iter().zip(x) {
                full[i] = v;
            }
            idx.iter().map(|&i| m.row_dot(i, &full)).collect()
        }
    }
}

/// Tail ratio `sum_{k>l} sigma_k / sum_k sigma_k`.
pub fn tail_ratio(sigma: &[f64], l: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s.max(0.0)).sum();
    if total == 0.0 {
        return 0.0;
    }
    sigma.iter().skip(l).map(|s| s.max(0.0)).sum::<f64>() / total
}

/// Centers the snapshots, diagonalizes the L2 correlation matrix and keeps
/// the leading modes.
pub fn pod_reduce(set: &SnapshotSet, mass: &SparseMatrix, opts: &PodOptions) -> Result<PodBasis> {
    pod_reduce_projected(set, mass, opts, None)
}

/// As [`pod_reduce`]; full-support fluctuations are first projected onto
/// `ker A`, which removes the round-off that would otherwise be amplified by
/// `1 / sqrt(sigma_k)` in the modes.
pub fn pod_reduce_projected(
    set: &SnapshotSet,
    mass: &SparseMatrix,
    opts: &PodOptions,
    projector: Option<&NullProjector>,
) -> Result<PodBasis> {
    let q = set.len();
    if q < 2 {
        return Err(Error::InvalidArgument(format!(
            "POD needs at least 2 snapshots, got {q}"
        )));
    }
    let len = set.support.len();
    let mut zeta0 = vec![0.0; len];
    for s in &set.snapshots {
        for (z, x) in zeta0.iter_mut().zip(s) {
            *z += x;
        }
    }
    zeta0.iter_mut().for_each(|z| *z /= q as f64);
    let full = matches!(set.support, Support::Full(_));
    let fluct: Vec<Vec<f64>> = set
        .snapshots
        .par_iter()
        .map(|s| {
            let mut u: Vec<f64> = s.iter().zip(&zeta0).map(|(x, z)| x - z).collect();
            if let (true, Some(p)) = (full, projector) {
                p.apply(&mut u);
            }
            u
        })
        .collect();
    let mfluct: Vec<Vec<f64>> = fluct
        .par_iter()
        .map(|u| mass_on_support(mass, &set.support, u))
        .collect();
    let mut k = DMatrix::<f64>::zeros(q, q);
    for j in 0..q {
        for l in j..q {
            let v = 0.5 * (dot(&fluct[l], &mfluct[j]) + dot(&fluct[j], &mfluct[l])) / q as f64;
            k[(j, l)] = v;
            k[(l, j)] = v;
        }
    }
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut sigma: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let mean_norm2 = dot(&zeta0, &mass_on_support(mass, &set.support, &zeta0));
    let s1 = sigma[0];
    let numeric = if s1 <= (RANK_TOL * RANK_TOL) * mean_norm2.max(f64::MIN_POSITIVE) {
        0
    } else {
        sigma.iter().take_while(|&&s| s > RANK_TOL * s1).count()
    };
    // below the numerical rank the eigenvalues are round-off of exact zeros
    sigma[numeric..].iter_mut().for_each(|s| *s = 0.0);
    let wanted = match (opts.modes, opts.rho) {
        (Some(m), _) => m,
        (None, Some(rho)) => (0..=q).find(|&l| tail_ratio(&sigma, l) < rho).unwrap_or(q),
        (None, None) => numeric,
    };
    let rank = wanted.min(numeric);

    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut mmodes: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for &idx in order.iter().take(rank) {
        let s = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        let scale = 1.0 / (q as f64 * s).sqrt();
        let mut z = vec![0.0; len];
        for (j, u) in fluct.iter().enumerate() {
            let c = scale * v[j];
            for (zi, ui) in z.iter_mut().zip(u) {
                *zi += c * ui;
            }
        }
        // re-orthonormalize against earlier modes
        for _ in 0..2 {
            for (p, mp) in modes.iter().zip(&mmodes) {
                let c = dot(mp, &z);
                for (zi, pi) in z.iter_mut().zip(p) {
                    *zi -= c * pi;
                }
            }
        }
        let mz = mass_on_support(mass, &set.support, &z);
        let nrm = dot(&z, &mz).sqrt();
        z.iter_mut().for_each(|x| *x /= nrm);
        mmodes.push(mz.into_iter().map(|x| x / nrm).collect());
        modes.push(z);
    }
    Ok(PodBasis {
        node: set.node,
        support: set.support.clone(),
        zeta0,
        modes,
        sigma,
        rho: opts.rho,
        q,
    })
}

/// `sum_j ||u_j - P_l u_j||^2 / sum_j ||u_j||^2` over the centered snapshots,
/// with `P_l` the L2 projection on the first `l` modes.
pub fn projection_error_ratio(set: &SnapshotSet, pod: &PodBasis, mass: &SparseMatrix, l: usize) -> f64 {
    let mmodes: Vec<Vec<f64>> = pod.modes[..l]
        .iter()
        .map(|z| mass_on_support(mass, &set.support, z))
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for s in &set.snapshots {
        let u: Vec<f64> = s.iter().zip(&pod.zeta0).map(|(x, z)| x - z).collect();
        let mut r = u.clone();
        for (z, mz) in pod.modes[..l].iter().zip(&mmodes) {
            let c = dot(mz, &u);
            for (ri, zi) in r.iter_mut().zip(z) {
                *ri -= c * zi;
            }
        }
        num += dot(&r, &mass_on_support(mass, &set.support, &r));
        den += dot(&u, &mass_on_support(mass, &set.support, &u));
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Reduces every node; nodes are independent.
pub fn pod_reduce_all(
    sets: &[SnapshotSet],
    mass: &SparseMatrix,
    opts: &PodOptions,
    constraint: Option<&Constraint>,
) -> Result<Vec<PodBasis>> {
    let projector = match constraint {
        Some(c) if c.patches.is_none() => Some(NullProjector::new(c)?),
        _ => None,
    };
    sets.par_iter()
        .map(|s| pod_reduce_projected(s, mass, opts, projector.as_ref()))
        .collect()
}

/// Per-node blocks `B^T G_base B` and `B^T V_j B` with `B = [zeta^0, ..., zeta^m]`.
#[derive(Clone, Debug)]
pub struct OnlineTensors {
    pub base: Vec<DMatrix<f64>>,
    /// `modes[i][j]` is the block of `V_{j+1}` at node `i`.
    pub modes: Vec<Vec<DMatrix<f64>>>,
}

fn block(a: &SparseMatrix, vecs: &[LocalVector]) -> DMatrix<f64> {
    let n = vecs.len();
    let mut out = DMatrix::zeros(n, n);
    let applied: Vec<Vec<f64>> = vecs
        .iter()
        .map(|v| {
            let mut full = vec![0.0; a.nrows()];
            v.scatter(&mut full);
            full
        })
        .collect();
    for k in 0..n {
        for l in k..n {
            let x = vecs[k]
                .iter()
                .map(|(i, v)| v * a.row_dot(i, &applied[l]))
                .sum::<f64>();
            out[(k, l)] = x;
            out[(l, k)] = x;
        }
    }
    out
}

impl OnlineTensors {
    pub fn new(pods: &[PodBasis], op: &AffineOperator) -> Self {
        let per_node: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)> = pods
            .par_iter()
            .map(|p| {
                let vecs: Vec<LocalVector> = (0..=p.rank()).map(|k| p.vector(k)).collect();
                let base = block(&op.base, &vecs);
                let modes = op.modes.iter().map(|v| block(v, &vecs)).collect();
                (base, modes)
            })
            .collect();
        let (base, modes) = per_node.into_iter().unzip();
        Self { base, modes }
    }

    /// `B^T G(w) B` at node `i`.
    pub fn assemble(&self, i: usize, omega: &[f64]) -> Result<DMatrix<f64>> {
        if omega.len() != self.modes[i].len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes[i].len(),
                got: omega.len(),
            });
        }
        let mut g = self.base[i].clone();
        for (w, t) in omega.iter().zip(&self.modes[i]) {
            if *w != 0.0 {
                g += *w * t;
            }
        }
        Ok(g)
    }
}

/// Online coefficients `c` of `zeta^1..zeta^m` at node `i`: `G~ c = -g~`.
pub fn online_coefficients(tensors: &OnlineTensors, i: usize, omega: &[f64]) -> Result<Vec<f64>> {
    let g = tensors.assemble(i, omega)?;
    let m = g.nrows() - 1;
    if m == 0 {
        return Ok(Vec::new());
    }
    let gt = g.view((1, 1), (m, m)).into_owned();
    let rhs = -g.view((1, 0), (m, 1)).into_owned();
    let chol = gt.cholesky().ok_or(Error::PodOnline { node: i })?;
    let c: DVector<f64> = chol.solve(&rhs).column(0).into_owned();
    Ok(c.as_slice().to_vec())
}

/// Approximated multiscale basis `phi^_i = zeta_i^0 + sum_k c_k zeta_i^k`.
pub fn online_basis(pods: &[PodBasis], tensors: &OnlineTensors, omega: &[f64]) -> Result<Vec<LocalVector>> {
    pods.iter()
        .enumerate()
        .map(|(i, p)| {
            let c = online_coefficients(tensors, i, omega)?;
            let mut v = p.zeta0.clone();
            for (ck, z) in c.iter().zip(&p.modes) {
                for (vi, zi) in v.iter_mut().zip(z) {
                    *vi += ck * zi;
                }
            }
            Ok(local_from(&p.support, v))
        })
        .collect()
}

/// Galerkin eigenpairs in the span of the online basis.
pub fn reduced_evp_pod(
    basis: &[LocalVector],
    op: &AffineOperator,
    omega: &[f64],
    k: usize,
) -> Result<crate::msfem::ReducedSolution> {
    let g = op.materialize(omega)?;
    crate::msfem::reduced_evp(basis, &g, &op.mass, k)
}
