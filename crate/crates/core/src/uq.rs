//! Sampling loops for expectations of eigenvalues: FEM reference, per-sample
//! multiscale bases, and the offline/online POD variant.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{affine_operator, AffineOperator};
use crate::eigen::{sparse_smallest_gevp, EigenPairs, SparseEigOptions};
use crate::error::{Error, Result};
use crate::lattice::{cbc_generating_vector, default_weights, is_prime, mc_points, prime_at_least, LatticeRule};
use crate::mesh::{nest, BoxDomain, FeSpace, Point};
use crate::msfem::{build_basis, reduced_evp, Constraint};
use crate::pod::{collect_snapshots, online_basis, pod_reduce_all, OnlineTensors, PodBasis, PodOptions};
use crate::potential::{potential_bounds, PotentialBounds, RandomPotentialSpec};
use crate::sparse::dot;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Fem,
    #[default]
    Msfem,
    MsfemPod,
}

fn default_shifts() -> usize {
    crate::lattice::DEFAULT_SHIFTS
}

/// How the online sample points are drawn. `shifts` is the number of random
/// shifts for lattice rules and the number of independent replicates for MC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerConfig {
    Qmc {
        n: usize,
        #[serde(default = "default_shifts")]
        shifts: usize,
        /// CBC product weights; `j^-2` when absent.
        #[serde(default)]
        weights: Option<Vec<f64>>,
        /// Precomputed generating vector (at least `s` components).
        #[serde(default)]
        generating_vector: Option<Vec<u64>>,
    },
    Mc {
        n: usize,
        #[serde(default = "default_shifts")]
        shifts: usize,
    },
}

impl SamplerConfig {
    pub fn n(&self) -> usize {
        match self {
            Self::Qmc { n, .. } | Self::Mc { n, .. } => *n,
        }
    }

    pub fn shifts(&self) -> usize {
        match self {
            Self::Qmc { shifts, .. } | Self::Mc { shifts, .. } => *shifts,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OfflineSampler {
    #[default]
    Qmc,
    Mc,
    /// The first `q` points of the first online shift.
    Online,
}

fn default_modes() -> Option<usize> {
    Some(3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    /// Snapshot count `Q`; `0` with the online sampler means every online point.
    pub q: usize,
    #[serde(default)]
    pub sampler: OfflineSampler,
    #[serde(default = "default_modes")]
    pub modes: Option<usize>,
    #[serde(default)]
    pub rho: Option<f64>,
}

impl OfflineConfig {
    pub fn pod_options(&self) -> PodOptions {
        PodOptions {
            modes: self.modes,
            rho: self.rho,
        }
    }
}

/// Weight `g` of the functional `G(psi) = (g, psi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalWeight {
    Constant { value: f64 },
    Indicator { lower: Vec<f64>, upper: Vec<f64> },
}

impl FunctionalWeight {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Indicator { lower, upper } => {
                let inside = lower
                    .iter()
                    .zip(upper)
                    .enumerate()
                    .all(|(d, (lo, hi))| p[d] >= *lo && p[d] <= *hi);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn single_point() -> SamplerConfig {
    SamplerConfig::Qmc {
        n: 1,
        shifts: 1,
        weights: None,
        generating_vector: None,
    }
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqConfig {
    pub domain: BoxDomain,
    pub potential: RandomPotentialSpec,
    pub eps: f64,
    /// Coarse cells per axis.
    pub coarse_cells: usize,
    /// Fine cells per axis; a multiple of `coarse_cells`.
    pub fine_cells: usize,
    /// A single unshifted point when absent (deterministic studies).
    #[serde(default = "single_point")]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub offline: Option<OfflineConfig>,
    #[serde(default)]
    pub functional: Option<FunctionalWeight>,
    /// Cut basis functions to their hat support grown by this many coarse layers.
    #[serde(default)]
    pub truncation_layers: Option<usize>,
    #[serde(default = "one_f")]
    pub admissibility_cap: f64,
    /// Fail instead of warning when the admissibility number exceeds the cap.
    #[serde(default)]
    pub admissibility_hard_fail: bool,
    #[serde(default)]
    pub keep_records: bool,
    #[serde(default = "default_tol")]
    pub eig_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl UqConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.coarse_cells == 0 || self.fine_cells == 0 || self.fine_cells % self.coarse_cells != 0 {
            return Err(Error::Nesting(format!(
                "{} fine cells per axis do not refine {} coarse cells",
                self.fine_cells, self.coarse_cells
            )));
        }
        if self.sampler.n() == 0 || self.sampler.shifts() == 0 {
            return bad("sampler needs n >= 1 and shifts >= 1".into());
        }
        if let SamplerConfig::Qmc {
            generating_vector: Some(z),
            ..
        } = &self.sampler
        {
            if z.len() < self.potential.s {
                return bad(format!("generating vector has {} < s = {} components", z.len(), self.potential.s));
            }
        }
        let shape_dim = match self.potential.shape {
            crate::potential::ModeShape::Sine => 1,
            crate::potential::ModeShape::SineProduct => 2,
        };
        if self.potential.s > 0 && shape_dim != self.domain.dim() {
            return bad(format!(
                "mode shape is {shape_dim}-dimensional, domain is {}-dimensional",
                self.domain.dim()
            ));
        }
        if self.solver == SolverKind::MsfemPod && self.offline.is_none() {
            return bad("solver msfem-pod needs an offline section".into());
        }
        if !(self.admissibility_cap > 0.0) {
            return bad("admissibility_cap must be positive".into());
        }
        Ok(())
    }

    pub fn coarse_mesh_size(&self) -> f64 {
        (0..self.domain.dim())
            .map(|a| self.domain.length(a) / self.coarse_cells as f64)
            .fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> PotentialBounds {
        potential_bounds(&self.potential, &self.domain)
    }

    /// `H sqrt(V_max) / eps`.
    pub fn admissibility(&self) -> f64 {
        self.coarse_mesh_size() * self.bounds().v_max.max(0.0).sqrt() / self.eps
    }
}

/// Warns (or fails in hard mode) when `H sqrt(V_max) / eps` exceeds the cap.
pub fn check_admissibility(cfg: &UqConfig) -> Result<f64> {
    let a = cfg.admissibility();
    if a > cfg.admissibility_cap {
        let msg = format!("H sqrt(V_max)/eps = {a:.4} exceeds cap {}", cfg.admissibility_cap);
        if cfg.admissibility_hard_fail {
            return Err(Error::Admissibility(msg));
        }
        log::warn!("{msg}; multiscale accuracy is not guaranteed");
    }
    Ok(a)
}

/// Meshes and operators shared by every sample.
pub struct Setup {
    pub fine: FeSpace,
    pub op: AffineOperator,
    pub constraint: Option<Constraint>,
}

impl Setup {
    pub fn new(cfg: &UqConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.domain.dim();
        let fine = FeSpace::uniform(&cfg.domain, &vec![cfg.fine_cells; dim])?;
        let op = affine_operator(&cfg.potential, &fine, cfg.eps);
        let constraint = if cfg.solver == SolverKind::Fem {
            None
        } else {
            let coarse = FeSpace::uniform(&cfg.domain, &vec![cfg.coarse_cells; dim])?;
            let c = Constraint::new(&nest(&coarse, &fine)?, &op.mass)?;
            Some(match cfg.truncation_layers {
                Some(l) => c.with_truncation(l),
                None => c,
            })
        };
        Ok(Self { fine, op, constraint })
    }

    fn constraint(&self) -> Result<&Constraint> {
        self.constraint
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("setup was built for the FEM solver".into()))
    }
}

/// Lattice rule used by a qMC sampler (with prime substitution for CBC).
pub fn lattice_rule(cfg: &UqConfig) -> Result<LatticeRule> {
    let SamplerConfig::Qmc {
        n,
        shifts,
        weights,
        generating_vector,
    } = &cfg.sampler
    else {
        return Err(Error::InvalidArgument("not a qMC sampler".into()));
    };
    let s = cfg.potential.s;
    let (n, z) = match generating_vector {
        Some(z) => (*n, z[..s].to_vec()),
        None if s == 0 => (*n, Vec::new()),
        None => {
            let np = if is_prime(*n) { *n } else { prime_at_least(*n) };
            if np != *n {
                log::info!("qMC sample count {n} is not prime, using {np}");
            }
            let w = weights.clone().unwrap_or_else(|| default_weights(s));
            (np, cbc_generating_vector(np, s, &w)?)
        }
    };
    LatticeRule::new(n, z, *shifts, cfg.seed)
}

fn replicate_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Online points, one set per shift (or MC replicate).
pub fn sample_sets(cfg: &UqConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    match &cfg.sampler {
        SamplerConfig::Qmc { .. } => {
            let rule = lattice_rule(cfg)?;
            (0..rule.num_shifts())
                .map(|r| crate::lattice::lattice_points(&rule, r))
                .collect()
        }
        SamplerConfig::Mc { n, shifts } => Ok((0..*shifts)
            .map(|r| mc_points(replicate_seed(cfg.seed, r), *n, cfg.potential.s))
            .collect()),
    }
}

/// Copies of the sample sets with `w_j = 0` for `j > s` (truncation study on
/// one fixed set of points and one operator).
pub fn zero_tail(samples: &[Vec<Vec<f64>>], s: usize) -> Vec<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|set| {
            set.iter()
                .map(|w| w.iter().enumerate().map(|(j, &x)| if j < s { x } else { 0.0 }).collect())
                .collect()
        })
        .collect()
}

/// Offline POD data of the MsFEM-POD pipeline.
pub struct Offline {
    pub pods: Vec<PodBasis>,
    pub tensors: OnlineTensors,
    /// Snapshot parameters actually used.
    pub snapshots: Vec<Vec<f64>>,
    pub seconds: f64,
}

/// Snapshot parameters for the offline stage.
pub fn snapshot_points(cfg: &UqConfig, online: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let off = cfg
        .offline
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("missing offline section".into()))?;
    let s = cfg.potential.s;
    let seed = cfg.seed.wrapping_add(1);
    match off.sampler {
        OfflineSampler::Online => {
            let first = online
                .first()
                .ok_or_else(|| Error::InvalidArgument("no online samples".into()))?;
            let q = if off.q == 0 { first.len() } else { off.q.min(first.len()) };
            Ok(first[..q].to_vec())
        }
        OfflineSampler::Mc => Ok(mc_points(seed, off.q, s)),
        OfflineSampler::Qmc => {
            if s == 0 {
                return Ok(vec![Vec::new(); off.q]);
            }
            let n = prime_at_least(off.q.max(2));
            let z = cbc_generating_vector(n, s, &default_weights(s))?;
            let rule = LatticeRule::new(n, z, 1, seed)?;
            crate::lattice::lattice_points(&rule, 0)
        }
    }
}

pub fn offline_stage(cfg: &UqConfig, setup: &Setup, online: &[Vec<Vec<f64>>]) -> Result<Offline> {
    let t = Instant::now();
    let constraint = setup.constraint()?;
    let snapshots = snapshot_points(cfg, online)?;
    let opts = cfg.offline.as_ref().map(|o| o.pod_options()).unwrap_or_default();
    let sets = collect_snapshots(&setup.op, constraint, &snapshots)?;
    let pods = pod_reduce_all(&sets, &setup.op.mass, &opts, Some(constraint))?;
    drop(sets);
    let tensors = OnlineTensors::new(&pods, &setup.op);
    Ok(Offline {
        pods,
        tensors,
        snapshots,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Eigenpairs of one sample with fine-mesh, `M`-normalized, gauge-fixed vectors.
pub fn solve_sample(
    cfg: &UqConfig,
    setup: &Setup,
    offline: Option<&Offline>,
    omega: &[f64],
) -> Result<EigenPairs> {
    let not_spd = |e: Error| match e {
        Error::NotPositiveDefinite { .. } => Error::Admissibility(format!(
            "operator is not positive definite ({e}); the smallest eigenvalue is not positive"
        )),
        e => e,
    };
    match cfg.solver {
        SolverKind::Fem => {
            let g = setup.op.materialize(omega)?;
            // shift just below the potential minimum, where the spectrum starts;
            // nodal values are not a strict bound, so fall back to zero
            let vmin = setup.op.nodal_min(omega)?;
            let mut opts = SparseEigOptions {
                tol: cfg.eig_tol,
                shift: vmin - 0.05 * (vmin.abs() + 1.0),
                ..Default::default()
            };
            match sparse_smallest_gevp(&g, &setup.op.mass, cfg.k, &opts) {
                Err(Error::NotPositiveDefinite { .. }) if opts.shift != 0.0 => {
                    opts.shift = 0.0;
                    sparse_smallest_gevp(&g, &setup.op.mass, cfg.k, &opts).map_err(not_spd)
                }
                r => r,
            }
        }
        SolverKind::Msfem => {
            let constraint = setup.constraint()?;
            let basis = build_basis(&setup.op, omega, constraint).map_err(not_spd)?;
            let g = setup.op.materialize(omega)?;
            Ok(reduced_evp(&basis.columns, &g, &setup.op.mass, cfg.k)?.pairs)
        }
        SolverKind::MsfemPod => {
            let off = offline.ok_or_else(|| Error::InvalidArgument("msfem-pod needs offline data".into()))?;
            let basis = online_basis(&off.pods, &off.tensors, omega)?;
            let g = setup.op.materialize(omega)?;
            Ok(reduced_evp(&basis, &g, &setup.op.mass, cfg.k)?.pairs)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub shift: usize,
    pub index: usize,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub functional: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqResult {
    pub solver: SolverKind,
    pub n: usize,
    pub shifts: usize,
    pub s: usize,
    pub k: usize,
    /// Sample mean of `lambda_1..lambda_k` for every shift.
    pub per_shift_means: Vec<Vec<f64>>,
    /// Mean of the per-shift means.
    pub mean: Vec<f64>,
    /// Sample variance over all `shifts * n` samples.
    pub variance: Vec<f64>,
    #[serde(default)]
    pub functional_per_shift: Option<Vec<f64>>,
    #[serde(default)]
    pub functional_mean: Option<f64>,
    /// POD snapshot count (MsFEM-POD only).
    #[serde(default)]
    pub snapshots: Option<usize>,
    pub admissibility: f64,
    pub timings: Timings,
    #[serde(default)]
    pub records: Option<Vec<SampleRecord>>,
    /// Nodal mean of the gauge-fixed ground state on the fine mesh.
    #[serde(skip)]
    pub mean_ground_state: Vec<f64>,
}

impl UqResult {
    /// Equality of every statistic, ignoring wall-clock timings.
    pub fn same_statistics(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            timings: Timings::default(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// Streaming mean and variance.
#[derive(Clone, Debug, Default)]
pub struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

/// `G(psi) = (g, psi)` with the fine mass matrix; `mg = M g`.
pub fn functional_of_ground_state(mg: &[f64], psi: &[f64]) -> f64 {
    dot(mg, psi)
}

/// Values of the functional for several vectors, and their mean.
pub fn functional_values(mg: &[f64], vectors: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let vals: Vec<f64> = vectors.iter().map(|v| functional_of_ground_state(mg, v)).collect();
    let mean = if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    (vals, mean)
}

/// `sqrt(mean_r (estimate_r - reference)^2)`.
pub fn rms_over_shifts(estimates: &[f64], reference: f64) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "RMS over shifts needs at least 2 shifts, got {}",
            estimates.len()
        )));
    }
    let ms = estimates.iter().map(|e| (e - reference).powi(2)).sum::<f64>() / estimates.len() as f64;
    Ok(ms.sqrt())
}

const CHUNK: usize = 64;

/// Streaming mean; exact when all values coincide.
fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut w = Welford::default();
    values.for_each(|v| w.push(v));
    w.mean()
}

/// Runs the sampling loop on prepared points; samples are solved in parallel
/// and reduced in index order.
pub fn run_on(
    cfg: &UqConfig,
    setup: &Setup,
    offline: Option<&Offline>,
    samples: &[Vec<Vec<f64>>],
) -> Result<UqResult> {
    let t = Instant::now();
    let k = cfg.k;
    let nf = setup.fine.dof_count();
    let mg = cfg.functional.as_ref().map(|g| {
        let gv = setup.fine.interpolate(|p| g.eval(p));
        setup.op.mass.matvec(&gv)
    });
    let mut stats = vec![Welford::default(); k];
    let mut per_shift_means = Vec::with_capacity(samples.len());
    let mut functional_per_shift = Vec::with_capacity(samples.len());
    let mut ground_sum = vec![0.0; nf];
    let mut records = cfg.keep_records.then(Vec::new);
    let mut total = 0usize;
    for (r, points) in samples.iter().enumerate() {
        let mut sums = vec![Welford::default(); k];
        let mut fsum = Welford::default();
        for (c, chunk) in points.chunks(CHUNK).enumerate() {
            let solved: Vec<(usize, Result<EigenPairs>)> = chunk
                .par_iter()
                .enumerate()
                .map(|(i, w)| (i, solve_sample(cfg, setup, offline, w)))
                .collect();
            for (i, res) in solved {
                let index = c * CHUNK + i;
                let pairs = res.map_err(|e| {
                    log::error!("sample {index} of shift {r} failed at omega = {:?}: {e}", points[index]);
                    e
                })?;
                if pairs.values.len() < k {
                    return Err(Error::NoConvergence {
                        iterations: 0,
                        converged: pairs.values.len(),
                        wanted: k,
                    });
                }
                for (j, &l) in pairs.values.iter().take(k).enumerate() {
                    sums[j].push(l);
                    stats[j].push(l);
                }
                let psi = &pairs.vectors[0];
                for (g, p) in ground_sum.iter_mut().zip(psi) {
                    *g += p;
                }
                let f = mg.as_ref().map(|mg| functional_of_ground_state(mg, psi));
                if let Some(f) = f {
                    fsum.push(f);
                }
                if let Some(rec) = records.as_mut() {
                    rec.push(SampleRecord {
                        shift: r,
                        index,
                        lambdas: pairs.values[..k].to_vec(),
                        functional: f,
                    });
                }
            }
        }
        total += points.len();
        per_shift_means.push(sums.iter().map(|s| s.mean()).collect::<Vec<f64>>());
        functional_per_shift.push(fsum.mean());
    }
    let mean = (0..k).map(|j| mean_of(per_shift_means.iter().map(|m| m[j]))).collect();
    let functional_mean = mg.is_some().then(|| mean_of(functional_per_shift.iter().copied()));
    ground_sum.iter_mut().for_each(|g| *g /= total.max(1) as f64);
    Ok(UqResult {
        solver: cfg.solver,
        n: samples.first().map_or(0, |p| p.len()),
        shifts: samples.len(),
        s: cfg.potential.s,
        k,
        per_shift_means,
        mean,
        variance: stats.iter().map(|w| w.variance()).collect(),
        functional_per_shift: mg.is_some().then_some(functional_per_shift),
        functional_mean,
        snapshots: offline.map(|o| o.snapshots.len()),
        admissibility: cfg.admissibility(),
        timings: Timings {
            setup_seconds: 0.0,
            offline_seconds: offline.map_or(0.0, |o| o.seconds),
            online_seconds: t.elapsed().as_secs_f64(),
        },
        records,
        mean_ground_state: ground_sum,
    })
}

fn run_checked(cfg: &UqConfig, want: SolverKind) -> Result<UqResult> {
    if cfg.solver != want {
        return Err(Error::InvalidArgument(format!(
            "configured solver {:?} does not match {:?}",
            cfg.solver, want
        )));
    }
    run(cfg)
}

/// MsFEM: a multiscale basis per sample.
pub fn run_algorithm1(cfg: &UqConfig) -> Result<UqResult> {
    run_checked(cfg, SolverKind::Msfem)
}

/// MsFEM-POD: POD offline stage, then cheap online bases.
pub fn run_algorithm2(cfg: &UqConfig) -> Result<UqResult> {
    run_checked(cfg, SolverKind::MsfemPod)
}

/// Fine-mesh FEM solved for every sample.
pub fn run_fem_reference(cfg: &UqConfig) -> Result<UqResult> {
    run_checked(cfg, SolverKind::Fem)
}

/// Dispatches on `cfg.solver`.
pub fn run(cfg: &UqConfig) -> Result<UqResult> {
    let t = Instant::now();
    cfg.validate()?;
    check_admissibility(cfg)?;
    let setup = Setup::new(cfg)?;
    let samples = sample_sets(cfg)?;
    let setup_seconds = t.elapsed().as_secs_f64();
    let offline = match cfg.solver {
        SolverKind::MsfemPod => Some(offline_stage(cfg, &setup, &samples)?),
        _ => None,
    };
    let mut res = run_on(cfg, &setup, offline.as_ref(), &samples)?;
    res.timings.setup_seconds = setup_seconds;
    Ok(res)
}

/// Random parameter vector in `[-1/2, 1/2)^s` (single realizations).
pub fn random_omega(seed: u64, s: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..s).map(|_| rng.random::<f64>() - 0.5).collect()
}
