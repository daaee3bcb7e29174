//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,5` restricts the run to the listed criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specsolve_core::assembly::{affine_operator, assemble_mass, h1_norm, l2_norm};
use specsolve_core::eigen::{dense_gevp, sparse_smallest_gevp, EigenPairs, SparseEigOptions};
use specsolve_core::lattice::{cbc_generating_vector, default_weights, shift_averaged_error};
use specsolve_core::mesh::{nest, BoxDomain, FeSpace};
use specsolve_core::msfem::{build_basis, fit_order, reduced_evp, Constraint};
use specsolve_core::pod::{pod_reduce, projection_error_ratio, tail_ratio, PodOptions, SnapshotSet};
use specsolve_core::local::Support;
use specsolve_core::potential::{potential_bounds, BasePotential, ModeShape, RandomPotentialSpec};
use specsolve_core::uq::{
    random_omega, rms_over_shifts, run, run_on, sample_sets, solve_sample, zero_tail, FunctionalWeight,
    OfflineConfig, OfflineSampler, SamplerConfig, Setup, SolverKind, UqConfig,
};

type Outcome = (bool, String);

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn fmt_slopes(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

// ---------------------------------------------------------------------------
// deterministic double-well study shared by criteria 1 and 2

const COARSE: [usize; 4] = [16, 32, 64, 128];
const PUBLISHED_ERRORS: [f64; 4] = [4.9166e-4, 4.2144e-6, 4.7839e-8, 6.8088e-10];
const PUBLISHED_LAMBDA: f64 = 2.762420126423838;

struct Study {
    reference: EigenPairs,
    /// `[coarse][k]` eigenvalue errors.
    lambda: Vec<Vec<f64>>,
    l2: Vec<Vec<f64>>,
    h1: Vec<Vec<f64>>,
}

fn double_well_study() -> &'static Study {
    static STUDY: OnceLock<Study> = OnceLock::new();
    STUDY.get_or_init(|| {
        let domain = BoxDomain::interval(-4.0, 4.0);
        let fine = FeSpace::uniform(&domain, &[2048]).unwrap();
        let spec = RandomPotentialSpec::deterministic(BasePotential::DoubleWell);
        let op = affine_operator(&spec, &fine, 1.0);
        let opts = SparseEigOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let reference = sparse_smallest_gevp(&op.base, &op.mass, 5, &opts).unwrap();
        let (mut lambda, mut l2, mut h1) = (vec![], vec![], vec![]);
        for nc in COARSE {
            let coarse = FeSpace::uniform(&domain, &[nc]).unwrap();
            let constraint = Constraint::new(&nest(&coarse, &fine).unwrap(), &op.mass).unwrap();
            let basis = build_basis(&op, &[], &constraint).unwrap();
            let ms = reduced_evp(&basis.columns, &op.base, &op.mass, 5).unwrap().pairs;
            let (mut el, mut e2, mut e1) = (vec![], vec![], vec![]);
            for k in 0..5 {
                el.push((ms.values[k] - reference.values[k]).abs());
                let (u, v) = (&reference.vectors[k], &ms.vectors[k]);
                // eigenvectors are compared up to sign
                let sign = op.mass.bilinear(u, v).signum();
                let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - sign * b).collect();
                e2.push(l2_norm(&op.mass, &d).unwrap());
                e1.push(h1_norm(&op.mass, &op.stiffness, &d).unwrap());
            }
            lambda.push(el);
            l2.push(e2);
            h1.push(e1);
        }
        Study {
            reference,
            lambda,
            l2,
            h1,
        }
    })
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn coarse_axis() -> Vec<f64> {
    COARSE.iter().map(|&n| n as f64).collect()
}

fn criterion_1() -> Outcome {
    let st = double_well_study();
    let lam1 = st.reference.values[0];
    let ref_ok = (lam1 - PUBLISHED_LAMBDA).abs() <= 1e-9;
    let errs = column(&st.lambda, 0);
    let ratios: Vec<f64> = errs.iter().zip(PUBLISHED_ERRORS).map(|(e, t)| e / t).collect();
    let ratio_ok = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let slope = fit_order(&coarse_axis(), &errs).unwrap().slope;
    let slope_ok = (-7.0..=-6.0).contains(&slope);
    (
        ref_ok && ratio_ok && slope_ok,
        format!(
            "lambda_ref = {lam1:.15} (|diff| {:.1e}); errors [{}] ratio to published [{}]; order {slope:.2}",
            (lam1 - PUBLISHED_LAMBDA).abs(),
            fmt_list(&errs),
            fmt_slopes(&ratios)
        ),
    )
}

fn criterion_2() -> Outcome {
    let st = double_well_study();
    let x = coarse_axis();
    let l2: Vec<f64> = (0..5).map(|k| fit_order(&x, &column(&st.l2, k)).unwrap().slope).collect();
    let h1: Vec<f64> = (0..5).map(|k| fit_order(&x, &column(&st.h1, k)).unwrap().slope).collect();
    let ok = l2.iter().all(|s| (-4.6..=-3.6).contains(s)) && h1.iter().all(|s| (-3.4..=-2.6).contains(s));
    (
        ok,
        format!("L2 orders [{}] in [-4.6,-3.6]; H1 orders [{}] in [-3.4,-2.6]", fmt_slopes(&l2), fmt_slopes(&h1)),
    )
}

fn criterion_3() -> Outcome {
    let x = coarse_axis();
    let mut worst = 0.0f64;
    let mut got = vec![];
    for p in [-6.0, -4.0, -3.0] {
        let e: Vec<f64> = x.iter().map(|n| 3.7 * n.powf(p)).collect();
        let s = fit_order(&x, &e).unwrap().slope;
        worst = worst.max((s - p).abs());
        got.push(s);
    }
    (
        worst <= 1e-12,
        format!("slopes [{}] max deviation {worst:.1e}", got.iter().map(|s| format!("{s:.12}")).collect::<Vec<_>>().join(", ")),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..50 {
        let q = rng.random_range(2..=64usize);
        let n = rng.random_range(8..=256usize);
        let fine = FeSpace::uniform(&BoxDomain::interval(0.0, 1.0), &[n]).unwrap();
        let mass = assemble_mass(&fine);
        // a few smooth directions plus noise gives a spread-out spectrum; the
        // noise level keeps every nonzero tail well above round-off of the total
        let dirs = rng.random_range(1..=q);
        let base: Vec<Vec<f64>> = (0..dirs)
            .map(|d| (0..n).map(|i| ((d + 1) as f64 * i as f64 * 0.37).sin()).collect())
            .collect();
        let snapshots: Vec<Vec<f64>> = (0..q)
            .map(|_| {
                let mut v: Vec<f64> = (0..n).map(|_| 1e-1 * (rng.random::<f64>() - 0.5)).collect();
                for b in &base {
                    let c = rng.random::<f64>() - 0.5;
                    v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
                }
                v
            })
            .collect();
        let set = SnapshotSet {
            node: 0,
            support: Support::Full(n),
            snapshots,
        };
        let pod = pod_reduce(&set, &mass, &PodOptions { modes: Some(q), rho: None }).unwrap();
        for l in 0..=pod.rank() {
            let p = projection_error_ratio(&set, &pod, &mass, l);
            let t = tail_ratio(&pod.sigma, l);
            worst = worst.max((p - t).abs() / t.max(1e-6));
            checked += 1;
        }
    }
    (
        worst <= 1e-10,
        format!("{checked} (set, rank) pairs; max relative deviation {worst:.2e}"),
    )
}

fn rational_config(s: usize, q: f64, coarse: usize, fine: usize, sampler: SamplerConfig) -> UqConfig {
    UqConfig {
        domain: BoxDomain::interval(-1.0, 1.0),
        potential: RandomPotentialSpec::rational_1d(s, q),
        eps: 1.0,
        coarse_cells: coarse,
        fine_cells: fine,
        sampler,
        solver: SolverKind::Fem,
        k: 1,
        offline: None,
        functional: None,
        truncation_layers: None,
        admissibility_cap: 1.0,
        admissibility_hard_fail: false,
        keep_records: false,
        eig_tol: 1e-11,
        seed: 0,
    }
}

fn qmc(n: usize, shifts: usize) -> SamplerConfig {
    SamplerConfig::Qmc {
        n,
        shifts,
        weights: None,
        generating_vector: None,
    }
}

fn criterion_5() -> Outcome {
    let cfg = |sampler| rational_config(8, 4.0 / 3.0, 8, 256, sampler);
    let reference = run(&cfg(qmc(4001, 4))).unwrap().mean[0];
    let ns = [127usize, 251, 503, 1009];
    let (mut q_rms, mut m_rms) = (vec![], vec![]);
    for &n in &ns {
        let a = run(&cfg(qmc(n, 8))).unwrap();
        let b = run(&cfg(SamplerConfig::Mc { n, shifts: 8 })).unwrap();
        let first = |r: &specsolve_core::uq::UqResult| r.per_shift_means.iter().map(|m| m[0]).collect::<Vec<_>>();
        q_rms.push(rms_over_shifts(&first(&a), reference).unwrap());
        m_rms.push(rms_over_shifts(&first(&b), reference).unwrap());
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let qs = fit_order(&x, &q_rms).unwrap().slope;
    let ms = fit_order(&x, &m_rms).unwrap().slope;
    (
        qs <= -0.8 && (-0.65..=-0.35).contains(&ms),
        format!(
            "qMC slope {qs:.2} (<= -0.8), RMS [{}]; MC slope {ms:.2} (in [-0.65,-0.35]), RMS [{}]",
            fmt_list(&q_rms),
            fmt_list(&m_rms)
        ),
    )
}

fn criterion_6() -> Outcome {
    let s_max = 32;
    let mut cfg = rational_config(s_max, 3.0, 64, 1024, qmc(251, 1));
    let samples = sample_sets(&cfg).unwrap();
    let fem = run_on(&cfg, &Setup::new(&cfg).unwrap(), None, &samples).unwrap().mean[0];
    cfg.solver = SolverKind::Msfem;
    let setup = Setup::new(&cfg).unwrap();
    let err = |s: usize| (run_on(&cfg, &setup, None, &zero_tail(&samples, s)).unwrap().mean[0] - fem).abs();
    let floor = err(s_max);
    let levels = [2usize, 4, 8, 16];
    let errs: Vec<f64> = levels.iter().map(|&s| err(s)).collect();
    // strictly decreasing until the error reaches the floor band
    let band = 10.0 * floor;
    let monotone = errs.windows(2).all(|w| w[1] < w[0] || w[0] <= band);
    (
        monotone && floor < 1e-7,
        format!(
            "errors for s = 2,4,8,16: [{}]; floor (s = {s_max}) {floor:.2e} < 1e-7",
            fmt_list(&errs)
        ),
    )
}

fn criterion_7() -> Outcome {
    // (a) every online point is a snapshot and nothing is truncated
    let mut cfg = rational_config(4, 2.0, 16, 256, qmc(61, 2));
    cfg.k = 3;
    cfg.solver = SolverKind::Msfem;
    let ms = run(&cfg).unwrap();
    cfg.solver = SolverKind::MsfemPod;
    cfg.offline = Some(OfflineConfig {
        q: 0,
        sampler: OfflineSampler::Online,
        modes: None,
        rho: Some(0.0),
    });
    let pod = run(&cfg).unwrap();
    let dev = ms
        .per_shift_means
        .iter()
        .flatten()
        .chain(&ms.variance)
        .zip(pod.per_shift_means.iter().flatten().chain(&pod.variance))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // (b) q = 0, s = 64, H = 1/16 on [-1,1], N_h = 2048, Q = 200, m = 3
    let mut cfg = rational_config(64, 0.0, 32, 2048, qmc(500, 1));
    let fem = run(&cfg).unwrap();
    cfg.solver = SolverKind::MsfemPod;
    cfg.offline = Some(OfflineConfig {
        q: 200,
        sampler: OfflineSampler::Qmc,
        modes: Some(3),
        rho: None,
    });
    let pod2 = run(&cfg).unwrap();
    let gap = (pod2.mean[0] - fem.mean[0]).abs();
    (
        dev <= 1e-8 && gap <= 5e-3,
        format!(
            "full-rank POD vs MsFEM max deviation {dev:.2e} (<= 1e-8); rough 1D setup N = {}, Q = {}: |E[lambda^_1] - E[lambda_1,FEM]| = {gap:.3e} (<= 5e-3), offline {:.1}s online {:.1}s",
            fem.n,
            pod2.snapshots.unwrap_or(0),
            pod2.timings.offline_seconds,
            pod2.timings.online_seconds
        ),
    )
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton on P_n from the Chebyshev guesses
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

fn criterion_8() -> Outcome {
    // (a) constrained minimization against a dense KKT solve
    let domain = BoxDomain::interval(0.0, 1.0);
    let fine = FeSpace::uniform(&domain, &[16]).unwrap();
    let coarse = FeSpace::uniform(&domain, &[4]).unwrap();
    let spec = RandomPotentialSpec::power(1.5, 1.0, 1.0, 2, ModeShape::Sine);
    let op = affine_operator(&spec, &fine, 0.3);
    let omega = [0.3, -0.2];
    let constraint = Constraint::new(&nest(&coarse, &fine).unwrap(), &op.mass).unwrap();
    let basis = build_basis(&op, &omega, &constraint).unwrap();
    let g = op.materialize(&omega).unwrap().to_dense();
    let a = constraint.cross.to_dense();
    let (nf, nc) = (16, 4);
    let mut kkt = DMatrix::<f64>::zeros(nf + nc, nf + nc);
    kkt.view_mut((0, 0), (nf, nf)).copy_from(&(2.0 * &g));
    kkt.view_mut((0, nf), (nf, nc)).copy_from(&a.transpose());
    kkt.view_mut((nf, 0), (nc, nf)).copy_from(&a);
    let lu = kkt.lu();
    let mut kkt_dev = 0.0f64;
    for i in 0..nc {
        let mut rhs = DVector::zeros(nf + nc);
        rhs[nf + i] = constraint.alpha[i];
        let sol = lu.solve(&rhs).unwrap();
        let col = basis.columns[i].to_full(nf);
        for r in 0..nf {
            kkt_dev = kkt_dev.max((sol[r] - col[r]).abs());
        }
    }

    // (b) two-dimensional parameter: lattice expectation vs 32 x 32 Gauss-Legendre
    let cfg = UqConfig {
        domain: BoxDomain::interval(-1.0, 1.0),
        potential: RandomPotentialSpec::power(2.0, 1.0, 0.0, 2, ModeShape::Sine),
        eps: 1.0,
        coarse_cells: 4,
        fine_cells: 16,
        sampler: qmc(4001, 8),
        solver: SolverKind::Fem,
        k: 1,
        offline: None,
        functional: None,
        truncation_layers: None,
        admissibility_cap: 10.0,
        admissibility_hard_fail: false,
        keep_records: false,
        eig_tol: 1e-12,
        seed: 0,
    };
    let driver = run(&cfg).unwrap().mean[0];
    let space = FeSpace::uniform(&cfg.domain, &[16]).unwrap();
    let op = affine_operator(&cfg.potential, &space, 1.0);
    let (x, w) = gauss_legendre(32);
    let mut oracle = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        for (xj, wj) in x.iter().zip(&w) {
            let g = op.materialize(&[0.5 * xi, 0.5 * xj]).unwrap();
            let l = dense_gevp(&g.to_dense(), &op.mass.to_dense(), 1).unwrap().values[0];
            oracle += 0.25 * wi * wj * l;
        }
    }
    let quad_dev = (driver - oracle).abs();

    // (c) CBC against exhaustive search
    let wts = default_weights(2);
    let z = cbc_generating_vector(31, 2, &wts).unwrap();
    let scores: Vec<f64> = (1..31u64).map(|c| shift_averaged_error(31, &[1, c], &wts)).collect();
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmin = scores.iter().position(|&v| v <= min * (1.0 + 1e-13)).unwrap() as u64 + 1;

    (
        kkt_dev <= 1e-10 && quad_dev <= 1e-6 && z[1] == argmin,
        format!(
            "(a) KKT max deviation {kkt_dev:.1e}; (b) lattice {driver:.12} vs Gauss-Legendre {oracle:.12}, |diff| {quad_dev:.1e}; (c) CBC z2 = {} exhaustive argmin {argmin}",
            z[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut notes = vec![];
    let mut ok = true;

    // sandwich, shift invariance and Galerkin ordering on a 1D q = 2 setup
    let mut cfg = UqConfig {
        domain: BoxDomain::interval(-1.0, 1.0),
        potential: RandomPotentialSpec::power(2.0, 1.0, 2.0, 32, ModeShape::Sine),
        eps: 1.0,
        coarse_cells: 16,
        fine_cells: 512,
        sampler: qmc(31, 1),
        solver: SolverKind::Fem,
        k: 5,
        offline: None,
        functional: None,
        truncation_layers: None,
        admissibility_cap: 1.0,
        admissibility_hard_fail: false,
        keep_records: false,
        eig_tol: 1e-12,
        seed: 9,
    };
    let bounds = potential_bounds(&cfg.potential, &cfg.domain);
    let fem_setup = Setup::new(&cfg).unwrap();
    let free = {
        let mut c = cfg.clone();
        c.potential = RandomPotentialSpec::deterministic(BasePotential::Constant { value: 0.0 });
        // the zero potential is singular at shift 0; use the dense pencil
        let op = affine_operator(&c.potential, &fem_setup.fine, 1.0);
        dense_gevp(&op.base.to_dense(), &op.mass.to_dense(), 5).unwrap().values
    };
    let mut ms_cfg = cfg.clone();
    ms_cfg.solver = SolverKind::Msfem;
    let ms_setup = Setup::new(&ms_cfg).unwrap();
    let mut shifted_cfg = cfg.clone();
    let c = 0.75;
    shifted_cfg.potential.v0 = BasePotential::Constant { value: 2.0 + c };
    let shifted_setup = Setup::new(&shifted_cfg).unwrap();
    let (mut sandwich, mut shift_dev, mut order_viol) = (0.0f64, 0.0f64, 0.0f64);
    for w in sample_sets(&cfg).unwrap().remove(0).iter().take(12) {
        let fem = solve_sample(&cfg, &fem_setup, None, w).unwrap();
        let ms = solve_sample(&ms_cfg, &ms_setup, None, w).unwrap();
        let sh = solve_sample(&shifted_cfg, &shifted_setup, None, w).unwrap();
        for k in 0..5 {
            let (lo, hi) = (free[k] + bounds.v_min, free[k] + bounds.v_max);
            sandwich = sandwich.max(lo - fem.values[k]).max(fem.values[k] - hi);
            shift_dev = shift_dev.max((sh.values[k] - fem.values[k] - c).abs());
            order_viol = order_viol.max(fem.values[k] - ms.values[k]);
        }
    }
    let tol = 1e-9;
    ok &= sandwich <= tol && shift_dev <= 1e-10 && order_viol <= tol;
    notes.push(format!(
        "sandwich violation {sandwich:.1e}, shift deviation {shift_dev:.1e}, max(lambda_fem - lambda_ms) {order_viol:.1e}"
    ));

    // reduced 2D q = 0 run, one realization
    cfg = UqConfig {
        domain: BoxDomain::square(-0.5, 0.5),
        potential: RandomPotentialSpec::power(17.0, 1.0, 0.0, 32, ModeShape::SineProduct),
        eps: 1.0 / 16.0,
        coarse_cells: 20,
        fine_cells: 200,
        sampler: SamplerConfig::Mc { n: 1, shifts: 1 },
        solver: SolverKind::Fem,
        k: 5,
        offline: Some(OfflineConfig {
            q: 5,
            sampler: OfflineSampler::Qmc,
            modes: Some(3),
            rho: None,
        }),
        functional: Some(FunctionalWeight::Constant { value: 1.0 }),
        truncation_layers: Some(2),
        admissibility_cap: 10.0,
        admissibility_hard_fail: false,
        keep_records: false,
        eig_tol: 1e-10,
        seed: 7,
    };
    let omega = vec![random_omega(7, 32)];
    let fem_setup = Setup::new(&cfg).unwrap();
    let fem = run_on(&cfg, &fem_setup, None, &[omega.clone()]).unwrap();
    drop(fem_setup);
    cfg.solver = SolverKind::MsfemPod;
    let setup = Setup::new(&cfg).unwrap();
    let offline = specsolve_core::uq::offline_stage(&cfg, &setup, &[omega.clone()]).unwrap();
    let pod = run_on(&cfg, &setup, Some(&offline), &[omega]).unwrap();
    let rel: Vec<f64> = fem.mean.iter().zip(&pod.mean).map(|(a, b)| (b - a).abs() / a.abs()).collect();
    let rel_ok = rel.iter().all(|r| *r <= 3e-2);
    ok &= rel_ok;
    notes.push(format!(
        "2D FEM [{}] vs MsFEM-POD [{}], relative errors [{}] (<= 3e-2)",
        fem.mean.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
        pod.mean.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
        fmt_list(&rel)
    ));
    (ok, notes.join("; "))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "double-well eigenvalue table", criterion_1),
        (2, "eigenfunction L2/H1 orders", criterion_2),
        (3, "order fit on exact powers", criterion_3),
        (4, "POD projection error identity", criterion_4),
        (5, "qMC vs MC convergence", criterion_5),
        (6, "truncation in s", criterion_6),
        (7, "POD pipeline consistency", criterion_7),
        (8, "oracle equivalence", criterion_8),
        (9, "substituted invariants and 2D run", criterion_9),
    ];
    let mut failed = vec![];
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {id} [{}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
