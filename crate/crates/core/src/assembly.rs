//! P1 mass, stiffness and potential matrices, the affine operator
//! `G(w) = (eps^2/2) S + V0 + sum_j w_j V_j`, and the coarse/fine cross mass.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{FeSpace, NestingMap, Point};
use crate::potential::RandomPotentialSpec;
use crate::sparse::{MatrixRole, SparseMatrix, SparsityPattern};

// 3-point Gauss rule on [0, 1]
const GAUSS3_X: [f64; 3] = [
    0.112_701_665_379_258_3,
    0.5,
    0.887_298_334_620_741_7,
];
const GAUSS3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

// 6-point degree-4 rule on the reference triangle (barycentric, weights sum to 1)
const TRI_A: f64 = 0.445_948_490_915_964_9;
const TRI_B: f64 = 0.091_576_213_509_770_74;
const TRI_WA: f64 = 0.223_381_589_678_011_5;
const TRI_WB: f64 = 0.109_951_743_655_321_9;

/// Quadrature points of cell `c` as `(weight * measure, point, barycentrics)`.
fn cell_quadrature(space: &FeSpace, c: usize) -> Vec<(f64, Point, [f64; 3])> {
    let mesh = space.mesh();
    let v = mesh.cell_vertices(c);
    let meas = mesh.cell_measure(c);
    if mesh.dim() == 1 {
        GAUSS3_X
            .iter()
            .zip(GAUSS3_W)
            .map(|(&t, w)| {
                let x = v[0][0] + t * (v[1][0] - v[0][0]);
                (w * meas, [x, 0.0], [1.0 - t, t, 0.0])
            })
            .collect()
    } else {
        let (a, b) = (TRI_A, TRI_B);
        let bary = [
            ([a, a, 1.0 - 2.0 * a], TRI_WA),
            ([a, 1.0 - 2.0 * a, a], TRI_WA),
            ([1.0 - 2.0 * a, a, a], TRI_WA),
            ([b, b, 1.0 - 2.0 * b], TRI_WB),
            ([b, 1.0 - 2.0 * b, b], TRI_WB),
            ([1.0 - 2.0 * b, b, b], TRI_WB),
        ];
        bary.iter()
            .map(|&(l, w)| {
                let p = [
                    l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                    l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                ];
                (w * meas, p, l)
            })
            .collect()
    }
}

fn local_mass(space: &FeSpace, c: usize) -> [[f64; 3]; 3] {
    let mesh = space.mesh();
    let meas = mesh.cell_measure(c);
    let mut k = [[0.0; 3]; 3];
    let n = mesh.dim() + 1;
    // exact: |T| (1 + delta_ab) / ((d + 1)(d + 2))
    let denom = (n * (n + 1)) as f64;
    for (a, row) in k.iter_mut().enumerate().take(n) {
        for (b, v) in row.iter_mut().enumerate().take(n) {
            *v = meas * if a == b { 2.0 } else { 1.0 } / denom;
        }
    }
    k
}

fn local_stiffness(space: &FeSpace, c: usize) -> [[f64; 3]; 3] {
    let mesh = space.mesh();
    let v = mesh.cell_vertices(c);
    let mut k = [[0.0; 3]; 3];
    if mesh.dim() == 1 {
        let h = v[1][0] - v[0][0];
        k[0][0] = 1.0 / h;
        k[1][1] = 1.0 / h;
        k[0][1] = -1.0 / h;
        k[1][0] = -1.0 / h;
    } else {
        let area = mesh.cell_measure(c);
        let grad = |i: usize| {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            [
                (v[j][1] - v[l][1]) / (2.0 * area),
                (v[l][0] - v[j][0]) / (2.0 * area),
            ]
        };
        let g = [grad(0), grad(1), grad(2)];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    k
}

fn local_potential(space: &FeSpace, c: usize, v: &(impl Fn(Point) -> f64 + ?Sized)) -> [[f64; 3]; 3] {
    let n = space.mesh().dim() + 1;
    let mut k = [[0.0; 3]; 3];
    for (w, p, l) in cell_quadrature(space, c) {
        let wv = w * v(p);
        for a in 0..n {
            for b in 0..n {
                k[a][b] += wv * l[a] * l[b];
            }
        }
    }
    k
}

fn assemble_local(
    space: &FeSpace,
    role: MatrixRole,
    local: impl Fn(usize) -> [[f64; 3]; 3],
) -> SparseMatrix {
    let mesh = space.mesh();
    let n = space.dof_count();
    let mut trip = Vec::with_capacity(mesh.num_cells() * (mesh.dim() + 1).pow(2));
    for c in 0..mesh.num_cells() {
        let dofs = mesh.cell_dofs(c);
        let k = local(c);
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                trip.push((i, j, k[a][b]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &trip, role)
}

/// Shares `pattern` with `m` when the patterns coincide.
fn share(m: SparseMatrix, pattern: &Arc<SparsityPattern>) -> SparseMatrix {
    if Arc::ptr_eq(m.pattern(), pattern) || **m.pattern() != **pattern {
        return m;
    }
    let role = m.role();
    SparseMatrix::with_pattern(pattern.clone(), m.values().to_vec(), role)
}

/// Exact P1 mass matrix `M_ij = (phi_i, phi_j)`.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    assemble_local(space, MatrixRole::Mass, |c| local_mass(space, c))
}

/// Exact P1 stiffness matrix `S_ij = (grad phi_i, grad phi_j)`.
pub fn assemble_stiffness(space: &FeSpace) -> SparseMatrix {
    assemble_local(space, MatrixRole::Stiffness, |c| local_stiffness(space, c))
}

/// `V_ij = (v phi_i, phi_j)` by per-cell quadrature.
pub fn assemble_potential(space: &FeSpace, v: impl Fn(Point) -> f64) -> SparseMatrix {
    assemble_local(space, MatrixRole::Potential, |c| local_potential(space, c, &v))
}

/// Affine decomposition of `G(w)` on one fine space. All matrices share one
/// sparsity pattern.
#[derive(Clone, Debug)]
pub struct AffineOperator {
    pub eps: f64,
    pub space: FeSpace,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub v0: SparseMatrix,
    pub modes: Vec<SparseMatrix>,
    /// `(eps^2/2) S + V0`.
    pub base: SparseMatrix,
    /// Nodal values of `v0` and of each mode, for cheap pointwise estimates.
    pub v0_nodal: Vec<f64>,
    pub modes_nodal: Vec<Vec<f64>>,
}

pub fn affine_operator(spec: &RandomPotentialSpec, space: &FeSpace, eps: f64) -> AffineOperator {
    let mass = assemble_mass(space);
    let pattern = mass.pattern().clone();
    let stiffness = share(assemble_stiffness(space), &pattern);
    let v0 = share(assemble_potential(space, |p| spec.v0.eval(p)), &pattern);
    let modes: Vec<SparseMatrix> = (1..=spec.s)
        .into_par_iter()
        .map(|j| share(assemble_potential(space, |p| spec.mode(j, p)), &pattern))
        .collect();
    let base = SparseMatrix::linear_combination(
        &[(0.5 * eps * eps, &stiffness), (1.0, &v0)],
        MatrixRole::Generic,
    );
    AffineOperator {
        eps,
        space: space.clone(),
        mass,
        stiffness,
        v0,
        modes,
        base,
        v0_nodal: space.interpolate(|p| spec.v0.eval(p)),
        modes_nodal: (1..=spec.s).map(|j| space.interpolate(|p| spec.mode(j, p))).collect(),
    }
}

impl AffineOperator {
    pub fn s(&self) -> usize {
        self.modes.len()
    }

    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }

    fn check_omega(&self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.s() {
            return Err(Error::DimensionMismatch {
                expected: self.s(),
                got: omega.len(),
            });
        }
        Ok(())
    }

    /// `G(w)` as a sparse matrix.
    pub fn materialize(&self, omega: &[f64]) -> Result<SparseMatrix> {
        self.check_omega(omega)?;
        let mut g = self.base.clone();
        for (w, m) in omega.iter().zip(&self.modes) {
            if *w != 0.0 {
                g.add_scaled(*w, m);
            }
        }
        Ok(g)
    }

    /// Smallest nodal value of `V(., w)`.
    pub fn nodal_min(&self, omega: &[f64]) -> Result<f64> {
        self.check_omega(omega)?;
        let mut v = self.v0_nodal.clone();
        for (w, m) in omega.iter().zip(&self.modes_nodal) {
            if *w != 0.0 {
                v.iter_mut().zip(m).for_each(|(a, b)| *a += w * b);
            }
        }
        Ok(v.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Potential part `V0 + sum_j w_j V_j`.
    pub fn potential_matrix(&self, omega: &[f64]) -> Result<SparseMatrix> {
        self.check_omega(omega)?;
        let mut v = self.v0.clone();
        for (w, m) in omega.iter().zip(&self.modes) {
            if *w != 0.0 {
                v.add_scaled(*w, m);
            }
        }
        Ok(v)
    }
}

/// `E(u) = 1/2 u^T G(w) u`.
pub fn energy(op: &AffineOperator, omega: &[f64], u: &[f64]) -> Result<f64> {
    check_len(op.dof_count(), u)?;
    Ok(0.5 * op.materialize(omega)?.quad_form(u))
}

fn check_len(n: usize, u: &[f64]) -> Result<()> {
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.len(),
        });
    }
    Ok(())
}

pub fn l2_inner(mass: &SparseMatrix, u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(mass.nrows(), u)?;
    check_len(mass.nrows(), v)?;
    Ok(mass.bilinear(u, v))
}

pub fn l2_norm(mass: &SparseMatrix, u: &[f64]) -> Result<f64> {
    Ok(l2_inner(mass, u, u)?.max(0.0).sqrt())
}

/// Full `H^1` norm `sqrt(u^T M u + u^T S u)`.
pub fn h1_norm(mass: &SparseMatrix, stiffness: &SparseMatrix, u: &[f64]) -> Result<f64> {
    check_len(mass.nrows(), u)?;
    check_len(stiffness.nrows(), u)?;
    Ok((mass.quad_form(u) + stiffness.quad_form(u)).max(0.0).sqrt())
}

/// Coarse-to-fine prolongation `P` (`N_h x N_H`): column `i` holds the fine
/// nodal values of the coarse hat `phi_i^H`.
pub fn prolongation(nesting: &NestingMap) -> SparseMatrix {
    let nf = nesting.fine().dof_count();
    let nc = nesting.coarse().dof_count();
    let mut trip = Vec::new();
    for k in 0..nf {
        for (i, w) in nesting.interpolation_weights(k) {
            trip.push((k, i, w));
        }
    }
    SparseMatrix::from_triplets(nf, nc, &trip, MatrixRole::Generic)
}

/// `A_ij = (phi_i^H, phi_j^h)`, computed exactly as `P^T M_h`.
pub fn constraint_cross(fine_mass: &SparseMatrix, nesting: &NestingMap) -> Result<SparseMatrix> {
    if fine_mass.nrows() != nesting.fine().dof_count() {
        return Err(Error::Nesting(format!(
            "fine mass has {} rows but the fine space has {} dofs",
            fine_mass.nrows(),
            nesting.fine().dof_count()
        )));
    }
    let pt = prolongation(nesting).transpose();
    Ok(pt.mul(fine_mass, MatrixRole::ConstraintCross))
}

/// `alpha_i = (1, phi_i^H)`: row sums of the cross mass.
pub fn constraint_alpha(cross: &SparseMatrix) -> Vec<f64> {
    cross.row_sums()
}
