//! Uniform periodic simplicial meshes on boxes and their P1 spaces.
//!
//! A mesh is stored with periodic identification already applied: the
//! vertex at `b_k` on every axis is the same degree of freedom as the one at
//! `a_k`. Cell geometry is kept unwrapped so that the last cell on an axis
//! still spans `[b_k - h_k, b_k]`.
//!
//! In 2D every square is split along its lower-left to upper-right diagonal:
//! triangle `2q` is `(ll, lr, ur)` and triangle `2q + 1` is `(ll, ur, ul)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 1D or 2D. In 1D the second coordinate is ignored.
pub type Point = [f64; 2];

/// Axis-aligned box `[a_0, b_0] x [a_1, b_1]` (or an interval in 1D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn interval(a: f64, b: f64) -> Self {
        Self {
            lower: vec![a],
            upper: vec![b],
        }
    }

    /// The square `[a, b]^2`.
    pub fn square(a: f64, b: f64) -> Self {
        Self {
            lower: vec![a, a],
            upper: vec![b, b],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim()).map(|k| self.length(k)).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Mesh("lower/upper corner dimension differ".into()));
        }
        for k in 0..self.dim() {
            let len = self.length(k);
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Mesh(format!("degenerate domain on axis {k}")));
            }
        }
        Ok(())
    }

    /// Representative of `x` in `[a_k, b_k)` on every axis.
    pub fn wrap(&self, p: Point) -> Point {
        let mut out = p;
        for k in 0..self.dim() {
            let len = self.length(k);
            let mut t = (p[k] - self.lower[k]).rem_euclid(len);
            if t >= len {
                t = 0.0;
            }
            out[k] = self.lower[k] + t;
        }
        out
    }
}

/// Uniform periodic mesh of segments (1D) or triangles (2D).
#[derive(Clone, Debug)]
pub struct PeriodicMesh {
    domain: BoxDomain,
    cells_per_axis: Vec<usize>,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
}

/// Builds a uniform periodic mesh with `cells_per_axis` cells on each axis.
pub fn build_periodic_mesh(
    domain: &BoxDomain,
    cells_per_axis: &[usize],
    dim: usize,
) -> Result<PeriodicMesh> {
    if dim != 1 && dim != 2 {
        return Err(Error::Mesh(format!("dimension {dim} not supported")));
    }
    domain.validate()?;
    if domain.dim() != dim || cells_per_axis.len() != dim {
        return Err(Error::Mesh(format!(
            "domain has {} axes and {} cell counts given, expected {dim}",
            domain.dim(),
            cells_per_axis.len()
        )));
    }
    if let Some(&n) = cells_per_axis.iter().find(|&&n| n < 2) {
        return Err(Error::Mesh(format!(
            "at least 2 cells per axis are required, got {n}"
        )));
    }

    let spacing: Vec<f64> = (0..dim)
        .map(|k| domain.length(k) / cells_per_axis[k] as f64)
        .collect();

    let (vertices, cells) = if dim == 1 {
        let n = cells_per_axis[0];
        let vertices = (0..n)
            .map(|i| [domain.lower[0] + i as f64 * spacing[0], 0.0])
            .collect();
        let cells = (0..n).map(|i| [i, (i + 1) % n, usize::MAX]).collect();
        (vertices, cells)
    } else {
        let (nx, ny) = (cells_per_axis[0], cells_per_axis[1]);
        let mut vertices = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([
                    domain.lower[0] + i as f64 * spacing[0],
                    domain.lower[1] + j as f64 * spacing[1],
                ]);
            }
        }
        let id = |i: usize, j: usize| (j % ny) * nx + (i % nx);
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (ll, lr, ur, ul) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                cells.push([ll, lr, ur]);
                cells.push([ll, ur, ul]);
            }
        }
        (vertices, cells)
    };

    Ok(PeriodicMesh {
        domain: domain.clone(),
        cells_per_axis: cells_per_axis.to_vec(),
        vertices,
        cells,
    })
}

impl PeriodicMesh {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.length(axis) / self.cells_per_axis[axis] as f64
    }

    /// Largest cell edge along the axes (the mesh size used in admissibility checks).
    pub fn mesh_size(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing(k))
            .fold(0.0, f64::max)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Coordinates of the degree of freedom `i` (the representative in `[a, b)`).
    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Global degrees of freedom of cell `c` (2 in 1D, 3 in 2D).
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim() + 1]
    }

    /// Unwrapped vertex coordinates of cell `c`, in the same order as [`Self::cell_dofs`].
    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let d = &self.domain;
        if self.dim() == 1 {
            let h = self.spacing(0);
            let x0 = d.lower[0] + c as f64 * h;
            [[x0, 0.0], [x0 + h, 0.0], [0.0, 0.0]]
        } else {
            let nx = self.cells_per_axis[0];
            let (hx, hy) = (self.spacing(0), self.spacing(1));
            let q = c / 2;
            let (i, j) = (q % nx, q / nx);
            let x0 = d.lower[0] + i as f64 * hx;
            let y0 = d.lower[1] + j as f64 * hy;
            let (ll, lr, ur, ul) = ([x0, y0], [x0 + hx, y0], [x0 + hx, y0 + hy], [x0, y0 + hy]);
            if c % 2 == 0 {
                [ll, lr, ur]
            } else {
                [ll, ur, ul]
            }
        }
    }

    /// Measure (length or area) of cell `c`.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell_vertices(c);
        if self.dim() == 1 {
            v[1][0] - v[0][0]
        } else {
            0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
        }
    }

    /// Lattice index of dof `i` along each axis.
    pub fn node_index(&self, i: usize) -> [usize; 2] {
        let nx = self.cells_per_axis[0];
        [i % nx, i / nx]
    }

    /// Dof at lattice index `idx` (taken modulo the periodic lattice).
    pub fn node_at(&self, idx: [usize; 2]) -> usize {
        let nx = self.cells_per_axis[0];
        if self.dim() == 1 {
            idx[0] % nx
        } else {
            (idx[1] % self.cells_per_axis[1]) * nx + idx[0] % nx
        }
    }

    /// Cell containing the (wrapped) point together with the barycentric
    /// weights of its vertices.
    pub fn locate(&self, p: Point) -> (usize, [f64; 3]) {
        let q = self.domain.wrap(p);
        let local = |axis: usize| {
            let n = self.cells_per_axis[axis];
            let t = (q[axis] - self.domain.lower[axis]) / self.spacing(axis);
            let i = (t.floor() as usize).min(n - 1);
            (i, (t - i as f64).clamp(0.0, 1.0))
        };
        if self.dim() == 1 {
            let (i, xi) = local(0);
            (i, [1.0 - xi, xi, 0.0])
        } else {
            let (i, xi) = local(0);
            let (j, eta) = local(1);
            let sq = j * self.cells_per_axis[0] + i;
            if xi >= eta {
                (2 * sq, [1.0 - xi, xi - eta, eta])
            } else {
                (2 * sq + 1, [1.0 - eta, xi, eta - xi])
            }
        }
    }
}

/// P1 finite element space on a periodic mesh.
///
/// Cheap to clone; the mesh and the node-to-cell adjacency are shared.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<PeriodicMesh>,
    node_cells: Arc<Vec<Vec<usize>>>,
}

impl FeSpace {
    pub fn new(mesh: PeriodicMesh) -> Self {
        let mut node_cells = vec![Vec::new(); mesh.num_vertices()];
        for c in 0..mesh.num_cells() {
            for &d in mesh.cell_dofs(c) {
                node_cells[d].push(c);
            }
        }
        Self {
            mesh: Arc::new(mesh),
            node_cells: Arc::new(node_cells),
        }
    }

    /// Convenience constructor: mesh plus space in one call.
    pub fn uniform(domain: &BoxDomain, cells_per_axis: &[usize]) -> Result<Self> {
        Ok(Self::new(build_periodic_mesh(
            domain,
            cells_per_axis,
            domain.dim(),
        )?))
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn dof_count(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Cells forming the support of the hat function at node `i`.
    pub fn support_cells(&self, i: usize) -> &[usize] {
        &self.node_cells[i]
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| f(p)).collect()
    }

    /// Evaluates the FE function with coefficients `coeffs` at `points`.
    pub fn eval(&self, coeffs: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        eval_fe_function(self, coeffs, points)
    }
}

/// Piecewise-linear interpolant values at arbitrary points (wrapped periodically).
pub fn eval_fe_function(space: &FeSpace, coeffs: &[f64], points: &[Point]) -> Result<Vec<f64>> {
    if coeffs.len() != space.dof_count() {
        return Err(Error::DimensionMismatch {
            expected: space.dof_count(),
            got: coeffs.len(),
        });
    }
    let mesh = space.mesh();
    Ok(points
        .iter()
        .map(|&p| {
            let (c, w) = mesh.locate(p);
            mesh.cell_dofs(c)
                .iter()
                .zip(w)
                .map(|(&d, wi)| wi * coeffs[d])
                .sum()
        })
        .collect())
}

/// Coarse/fine pair of spaces where every coarse cell is tiled by fine cells.
#[derive(Clone, Debug)]
pub struct NestingMap {
    coarse: FeSpace,
    fine: FeSpace,
    ratio: Vec<usize>,
}

/// Checks that `fine` refines `coarse` by an integer factor on every axis.
pub fn nest(coarse: &FeSpace, fine: &FeSpace) -> Result<NestingMap> {
    let (cm, fm) = (coarse.mesh(), fine.mesh());
    if cm.dim() != fm.dim() {
        return Err(Error::Nesting("spaces have different dimensions".into()));
    }
    let same_domain = (0..cm.dim()).all(|k| {
        let scale = cm.domain().length(k).abs().max(1.0);
        (cm.domain().lower[k] - fm.domain().lower[k]).abs() <= 1e-14 * scale
            && (cm.domain().upper[k] - fm.domain().upper[k]).abs() <= 1e-14 * scale
    });
    if !same_domain {
        return Err(Error::Nesting("spaces live on different domains".into()));
    }
    let mut ratio = Vec::with_capacity(cm.dim());
    for k in 0..cm.dim() {
        let (nc, nf) = (cm.cells_per_axis()[k], fm.cells_per_axis()[k]);
        if nf % nc != 0 || nf / nc < 2 {
            return Err(Error::Nesting(format!(
                "axis {k}: fine cells {nf} are not an integer multiple (>= 2) of coarse cells {nc}"
            )));
        }
        ratio.push(nf / nc);
    }
    Ok(NestingMap {
        coarse: coarse.clone(),
        fine: fine.clone(),
        ratio,
    })
}

impl NestingMap {
    pub fn coarse(&self) -> &FeSpace {
        &self.coarse
    }

    pub fn fine(&self) -> &FeSpace {
        &self.fine
    }

    pub fn ratio(&self) -> &[usize] {
        &self.ratio
    }

    /// Coarse hat weights at fine node `k`: pairs `(coarse dof, value)`.
    ///
    /// Fine nodes lie on coarse edges or vertices, so the coarse function
    /// evaluated there reproduces the nodal interpolant exactly.
    pub fn interpolation_weights(&self, k: usize) -> Vec<(usize, f64)> {
        let fm = self.fine.mesh();
        let cm = self.coarse.mesh();
        let idx = fm.node_index(k);
        let dim = fm.dim();
        // Exact rational local coordinates avoid round-off in the cell lookup.
        let mut cell = [0usize; 2];
        let mut local = [0.0f64; 2];
        for a in 0..dim {
            cell[a] = idx[a] / self.ratio[a];
            local[a] = (idx[a] % self.ratio[a]) as f64 / self.ratio[a] as f64;
        }
        let mut out = Vec::with_capacity(3);
        let mut push = |node: [usize; 2], w: f64| {
            if w != 0.0 {
                out.push((cm.node_at(node), w));
            }
        };
        if dim == 1 {
            push([cell[0], 0], 1.0 - local[0]);
            push([cell[0] + 1, 0], local[0]);
        } else {
            let (i, j) = (cell[0], cell[1]);
            let (xi, eta) = (local[0], local[1]);
            if xi >= eta {
                push([i, j], 1.0 - xi);
                push([i + 1, j], xi - eta);
                push([i + 1, j + 1], eta);
            } else {
                push([i, j], 1.0 - eta);
                push([i + 1, j + 1], xi);
                push([i, j + 1], eta - xi);
            }
        }
        out
    }

    /// Fine-space coefficients of a coarse FE function.
    pub fn interpolate(&self, coarse_coeffs: &[f64]) -> Result<Vec<f64>> {
        if coarse_coeffs.len() != self.coarse.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.coarse.dof_count(),
                got: coarse_coeffs.len(),
            });
        }
        Ok((0..self.fine.dof_count())
            .map(|k| {
                self.interpolation_weights(k)
                    .iter()
                    .map(|&(i, w)| w * coarse_coeffs[i])
                    .sum()
            })
            .collect())
    }

    /// Fine dof coinciding with coarse node `i`.
    pub fn fine_node_of(&self, i: usize) -> usize {
        let idx = self.coarse.mesh().node_index(i);
        self.fine
            .mesh()
            .node_at([idx[0] * self.ratio[0], idx[1] * self.ratio.get(1).copied().unwrap_or(1)])
    }

    /// Nodal restriction: samples a fine function at the coarse nodes.
    pub fn restrict(&self, fine_coeffs: &[f64]) -> Result<Vec<f64>> {
        if fine_coeffs.len() != self.fine.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.fine.dof_count(),
                got: fine_coeffs.len(),
            });
        }
        Ok((0..self.coarse.dof_count())
            .map(|i| fine_coeffs[self.fine_node_of(i)])
            .collect())
    }

    /// Periodic max-norm distance between coarse node `i` and fine node `k`,
    /// measured in coarse cells.
    pub fn coarse_distance(&self, i: usize, k: usize) -> f64 {
        let ci = self.coarse.mesh().node_index(i);
        let fk = self.fine.mesh().node_index(k);
        let fm = self.fine.mesh();
        let mut dist = 0.0f64;
        for a in 0..fm.dim() {
            let n = fm.cells_per_axis()[a] as i64;
            let delta = (fk[a] as i64 - (ci[a] * self.ratio[a]) as i64).rem_euclid(n);
            let d = delta.min(n - delta) as f64 / self.ratio[a] as f64;
            dist = dist.max(d);
        }
        dist
    }

    /// Fine nodes within `layers + 1` coarse cells of coarse node `i`
    /// (the hat support grown by `layers` rings), sorted ascending.
    pub fn patch(&self, i: usize, layers: usize) -> Vec<usize> {
        let reach = (layers + 1) as f64;
        (0..self.fine.dof_count())
            .filter(|&k| self.coarse_distance(i, k) <= reach)
            .collect()
    }
}
