use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use specsolve_core::assembly::{h1_norm, l2_norm, AffineOperator};
use specsolve_core::eigen::EigenPairs;
use specsolve_core::mesh::nest;
use specsolve_core::msfem::{fit_order, OrderFit};
use specsolve_core::uq::{
    check_admissibility, offline_stage, random_omega, rms_over_shifts, run_on, sample_sets, solve_sample, zero_tail,
    Offline, SamplerConfig, Setup, SolverKind, UqConfig, UqResult,
};
use specsolve_core::Error;

use crate::config::{ExperimentConfig, SamplerKind, StudyKind};
use crate::output::{num, schema, Sink};

/// Order fits per eigenpair; `None` where fewer than three usable levels remain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub resolution: Vec<usize>,
    pub eigenvalue: Vec<Option<OrderFit>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub l2: Vec<Option<OrderFit>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h1: Vec<Option<OrderFit>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvpOrders {
    pub msfem: Orders,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fem: Option<Orders>,
}

/// Contents of `summary.json` written by the `uq` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqSummary {
    pub result: UqResult,
    /// Fine FEM on the same samples, when requested.
    pub reference: Option<UqResult>,
    /// `|E[lambda_j] - E[lambda_j,FEM]|` per eigenvalue.
    pub abs_error: Option<Vec<f64>>,
    /// RMS of the per-shift means about the reference mean (needs two shifts).
    pub rms_per_shift: Option<Vec<f64>>,
}

pub fn run(kind: StudyKind, exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    check_admissibility(&exp.uq)?;
    match kind {
        StudyKind::SolveEvp => solve_evp(exp, sink),
        StudyKind::Uq => uq(exp, sink),
        StudyKind::HStudy => h_study(exp, sink),
        StudyKind::SStudy => s_study(exp, sink),
        StudyKind::NStudy => n_study(exp, sink),
        StudyKind::QStudy => q_study(exp, sink),
        StudyKind::Localization => localization(exp, sink),
    }
}

fn with_solver(cfg: &UqConfig, solver: SolverKind) -> UqConfig {
    UqConfig { solver, ..cfg.clone() }
}

/// The multiscale solver of a study; a FEM-configured run falls back to MsFEM.
fn multiscale(cfg: &UqConfig) -> UqConfig {
    match cfg.solver {
        SolverKind::Fem => with_solver(cfg, SolverKind::Msfem),
        _ => cfg.clone(),
    }
}

fn omega_of(exp: &ExperimentConfig, random: bool) -> Vec<f64> {
    let s = exp.uq.potential.s;
    match &exp.params.omega {
        Some(w) => w.clone(),
        None if random => random_omega(exp.uq.seed, s),
        None => vec![0.0; s],
    }
}

/// One realization with any solver; POD snapshots come from `omega` itself
/// when the offline sampler is `online`.
fn solve_one(cfg: &UqConfig, setup: &Setup, omega: &[f64]) -> Result<EigenPairs> {
    let offline = match cfg.solver {
        SolverKind::MsfemPod => Some(offline_stage(cfg, setup, &[vec![omega.to_vec()]])?),
        _ => None,
    };
    Ok(solve_sample(cfg, setup, offline.as_ref(), omega)?)
}

fn offline_for(cfg: &UqConfig, setup: &Setup, samples: &[Vec<Vec<f64>>]) -> Result<Option<Offline>> {
    Ok(match cfg.solver {
        SolverKind::MsfemPod => Some(offline_stage(cfg, setup, samples)?),
        _ => None,
    })
}

/// `L2` and full `H1` errors after aligning the sign of `v` with `u`.
fn vector_errors(op: &AffineOperator, u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let sign = if op.mass.bilinear(u, v) < 0.0 { -1.0 } else { 1.0 };
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - sign * b).collect();
    Ok((l2_norm(&op.mass, &d)?, h1_norm(&op.mass, &op.stiffness, &d)?))
}

fn fits(n: &[usize], errors: &[Vec<f64>]) -> Vec<Option<OrderFit>> {
    let x: Vec<f64> = n.iter().map(|&v| v as f64).collect();
    errors.iter().map(|e| fit_order(&x, e).ok()).collect()
}

fn nodal_potential(op: &AffineOperator, omega: &[f64]) -> Vec<f64> {
    let mut v = op.v0_nodal.clone();
    for (w, m) in omega.iter().zip(&op.modes_nodal) {
        v.iter_mut().zip(m).for_each(|(a, b)| *a += w * b);
    }
    v
}

fn check_pairs(p: &EigenPairs, k: usize) -> Result<()> {
    if p.values.len() < k {
        return Err(Error::NoConvergence {
            iterations: 0,
            converged: p.values.len(),
            wanted: k,
        }
        .into());
    }
    Ok(())
}

/// Deterministic convergence in `H` (and optionally `h`) for one realization,
/// `omega = 0` unless given.
fn solve_evp(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = &exp.uq;
    let k = cfg.k;
    let omega = omega_of(exp, false);
    let fem_cfg = with_solver(cfg, SolverKind::Fem);
    let fem_setup = Setup::new(&fem_cfg)?;
    let fem = solve_sample(&fem_cfg, &fem_setup, None, &omega)?;
    check_pairs(&fem, k)?;
    let op = &fem_setup.op;

    let mut levels = exp.params.coarse_levels.clone();
    if levels.is_empty() {
        levels.push(cfg.coarse_cells);
    }
    let mut rows = Vec::new();
    let (mut abs, mut l2, mut h1) = (vec![vec![]; k], vec![vec![]; k], vec![vec![]; k]);
    let mut finest = None;
    for &nc in &levels {
        let ms_cfg = UqConfig {
            coarse_cells: nc,
            ..multiscale(cfg)
        };
        let setup = Setup::new(&ms_cfg)?;
        let ms = solve_one(&ms_cfg, &setup, &omega)?;
        check_pairs(&ms, k)?;
        for j in 0..k {
            let e = (ms.values[j] - fem.values[j]).abs();
            let (el2, eh1) = vector_errors(op, &fem.vectors[j], &ms.vectors[j])?;
            abs[j].push(e);
            l2[j].push(el2);
            h1[j].push(eh1);
            rows.push(vec![
                nc.to_string(),
                (j + 1).to_string(),
                num(fem.values[j]),
                num(ms.values[j]),
                num(e),
                num(el2),
                num(eh1),
            ]);
        }
        log::info!("coarse cells {nc}: lambda_1 error {:e}", abs[0][0]);
        if finest.as_ref().is_none_or(|(n, _)| *n < nc) {
            finest = Some((nc, ms));
        }
    }
    sink.table("eigenvalues.csv", schema::EIGENVALUES, &rows)?;

    let mut orders = EvpOrders {
        msfem: Orders {
            resolution: levels.clone(),
            eigenvalue: fits(&levels, &abs),
            l2: fits(&levels, &l2),
            h1: fits(&levels, &h1),
        },
        fem: None,
    };

    let fem_levels = &exp.params.fem_levels;
    if !fem_levels.is_empty() {
        let mut rows = Vec::new();
        let (mut abs, mut l2, mut h1) = (vec![vec![]; k], vec![vec![]; k], vec![vec![]; k]);
        for &nf in fem_levels {
            let c = UqConfig {
                fine_cells: nf,
                coarse_cells: nf,
                ..fem_cfg.clone()
            };
            let setup = Setup::new(&c)?;
            let coarse_fem = solve_sample(&c, &setup, None, &omega)?;
            check_pairs(&coarse_fem, k)?;
            let map = nest(&setup.fine, &fem_setup.fine)?;
            for j in 0..k {
                let v = map.interpolate(&coarse_fem.vectors[j])?;
                let e = (coarse_fem.values[j] - fem.values[j]).abs();
                let (el2, eh1) = vector_errors(op, &fem.vectors[j], &v)?;
                abs[j].push(e);
                l2[j].push(el2);
                h1[j].push(eh1);
                rows.push(vec![nf.to_string(), (j + 1).to_string(), num(coarse_fem.values[j]), num(e), num(el2), num(eh1)]);
            }
        }
        sink.table("fem_convergence.csv", schema::FEM_CONVERGENCE, &rows)?;
        orders.fem = Some(Orders {
            resolution: fem_levels.clone(),
            eigenvalue: fits(fem_levels, &abs),
            l2: fits(fem_levels, &l2),
            h1: fits(fem_levels, &h1),
        });
    }
    sink.json("orders.json", &orders)?;

    sink.field("potential.csv", &fem_setup.fine, &nodal_potential(op, &omega))?;
    for j in 0..k {
        sink.field(&format!("eigenfunction_fem_{}.csv", j + 1), &fem_setup.fine, &fem.vectors[j])?;
    }
    if let Some((_, ms)) = finest {
        for j in 0..k {
            sink.field(&format!("eigenfunction_ms_{}.csv", j + 1), &fem_setup.fine, &ms.vectors[j])?;
        }
    }
    Ok(())
}

fn uq(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = &exp.uq;
    let t = Instant::now();
    let setup = Setup::new(cfg)?;
    let samples = sample_sets(cfg)?;
    let setup_seconds = t.elapsed().as_secs_f64();
    let offline = offline_for(cfg, &setup, &samples)?;
    let mut result = run_on(cfg, &setup, offline.as_ref(), &samples)?;
    result.timings.setup_seconds = setup_seconds;
    let ground = std::mem::take(&mut result.mean_ground_state);

    let reference = if exp.params.compare_fem && cfg.solver != SolverKind::Fem {
        let fem_cfg = UqConfig {
            keep_records: false,
            ..with_solver(cfg, SolverKind::Fem)
        };
        let mut r = run_on(&fem_cfg, &setup, None, &samples)?;
        r.mean_ground_state.clear();
        Some(r)
    } else {
        None
    };
    let abs_error = reference
        .as_ref()
        .map(|r| result.mean.iter().zip(&r.mean).map(|(a, b)| (a - b).abs()).collect());
    let rms_per_shift = match &reference {
        Some(r) if result.shifts >= 2 => Some(
            (0..cfg.k)
                .map(|j| {
                    let est: Vec<f64> = result.per_shift_means.iter().map(|m| m[j]).collect();
                    rms_over_shifts(&est, r.mean[j])
                })
                .collect::<specsolve_core::Result<Vec<f64>>>()?,
        ),
        _ => None,
    };

    if let Some(recs) = &result.records {
        let rows: Vec<Vec<String>> = recs
            .iter()
            .flat_map(|r| {
                r.lambdas.iter().enumerate().map(move |(j, l)| {
                    vec![
                        r.shift.to_string(),
                        r.index.to_string(),
                        (j + 1).to_string(),
                        num(*l),
                        r.functional.map(num).unwrap_or_default(),
                    ]
                })
            })
            .collect();
        sink.table("samples.csv", schema::SAMPLES, &rows)?;
    }
    sink.field("mean_ground_state.csv", &setup.fine, &ground)?;
    sink.json(
        "summary.json",
        &UqSummary {
            result,
            reference,
            abs_error,
            rms_per_shift,
        },
    )?;
    Ok(())
}

/// Expectations of the multiscale solver against FEM on shared samples, per `N_H`.
fn h_study(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = &exp.uq;
    let k = cfg.k;
    let fem_cfg = with_solver(cfg, SolverKind::Fem);
    let fem_setup = Setup::new(&fem_cfg)?;
    let samples = sample_sets(cfg)?;
    let fem = run_on(&fem_cfg, &fem_setup, None, &samples)?;
    drop(fem_setup);
    let levels = &exp.params.coarse_levels;
    let mut rows = Vec::new();
    let mut abs = vec![vec![]; k];
    for &nc in levels {
        let c = UqConfig {
            coarse_cells: nc,
            ..multiscale(cfg)
        };
        let setup = Setup::new(&c)?;
        let offline = offline_for(&c, &setup, &samples)?;
        let ms = run_on(&c, &setup, offline.as_ref(), &samples)?;
        for j in 0..k {
            let e = (ms.mean[j] - fem.mean[j]).abs();
            abs[j].push(e);
            rows.push(vec![nc.to_string(), (j + 1).to_string(), num(fem.mean[j]), num(ms.mean[j]), num(e)]);
        }
    }
    sink.table("h_study.csv", schema::H_STUDY, &rows)?;
    sink.json(
        "orders.json",
        &Orders {
            resolution: levels.clone(),
            eigenvalue: fits(levels, &abs),
            ..Default::default()
        },
    )?;
    Ok(())
}

/// Truncation study: the reference is FEM with all `potential.s` modes, each
/// row zeroes the parameters beyond `s` and keeps the same points.
fn s_study(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = &exp.uq;
    let k = cfg.k;
    let samples = sample_sets(cfg)?;
    let fem_cfg = with_solver(cfg, SolverKind::Fem);
    let reference = {
        let setup = Setup::new(&fem_cfg)?;
        run_on(&fem_cfg, &setup, None, &samples)?
    };
    let ms_cfg = multiscale(cfg);
    let setup = Setup::new(&ms_cfg)?;
    let mut rows = Vec::new();
    for &s in &exp.params.s_values {
        let pts = zero_tail(&samples, s);
        let offline = offline_for(&ms_cfg, &setup, &pts)?;
        let r = run_on(&ms_cfg, &setup, offline.as_ref(), &pts)?;
        for j in 0..k {
            rows.push(vec![
                s.to_string(),
                (j + 1).to_string(),
                num(r.mean[j]),
                num(reference.mean[j]),
                num((r.mean[j] - reference.mean[j]).abs()),
            ]);
        }
    }
    sink.table("s_study.csv", schema::S_STUDY, &rows)?;
    Ok(())
}

fn sampler(kind: SamplerKind, n: usize, shifts: usize) -> SamplerConfig {
    match kind {
        SamplerKind::Qmc => SamplerConfig::Qmc {
            n,
            shifts,
            weights: None,
            generating_vector: None,
        },
        SamplerKind::Mc => SamplerConfig::Mc { n, shifts },
    }
}

/// RMS error over shifts against a high-`N` qMC reference of the same solver.
fn n_study(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = &exp.uq;
    let k = cfg.k;
    let p = &exp.params;
    let shifts = cfg.sampler.shifts();
    let setup = Setup::new(cfg)?;
    let ref_cfg = UqConfig {
        sampler: sampler(SamplerKind::Qmc, p.reference_n, p.reference_shifts),
        ..cfg.clone()
    };
    let ref_samples = sample_sets(&ref_cfg)?;
    let offline = offline_for(cfg, &setup, &ref_samples)?;
    let reference = run_on(&ref_cfg, &setup, offline.as_ref(), &ref_samples)?;
    let kinds = if p.samplers.is_empty() {
        vec![SamplerKind::Qmc, SamplerKind::Mc]
    } else {
        p.samplers.clone()
    };
    let mut rows = Vec::new();
    let mut resolution = Vec::new();
    let mut fits_out = Vec::new();
    for kind in kinds {
        let mut errs = vec![vec![]; k];
        let mut used = Vec::new();
        for &n in &p.n_values {
            let c = UqConfig {
                sampler: sampler(kind, n, shifts),
                ..cfg.clone()
            };
            let pts = sample_sets(&c)?;
            let r = run_on(&c, &setup, offline.as_ref(), &pts)?;
            used.push(r.n);
            for j in 0..k {
                let est: Vec<f64> = r.per_shift_means.iter().map(|m| m[j]).collect();
                let rms = rms_over_shifts(&est, reference.mean[j])?;
                errs[j].push(rms);
                rows.push(vec![
                    format!("{kind:?}").to_lowercase(),
                    r.n.to_string(),
                    shifts.to_string(),
                    (j + 1).to_string(),
                    num(r.mean[j]),
                    num(reference.mean[j]),
                    num(rms),
                ]);
            }
        }
        resolution = used.clone();
        fits_out.push((kind, fits(&used, &errs)));
    }
    sink.table("n_study.csv", schema::N_STUDY, &rows)?;
    #[derive(Serialize)]
    struct NOrders {
        sampler: SamplerKind,
        n: Vec<usize>,
        rms: Vec<Option<OrderFit>>,
    }
    let orders: Vec<NOrders> = fits_out
        .into_iter()
        .map(|(sampler, rms)| NOrders {
            sampler,
            n: resolution.clone(),
            rms,
        })
        .collect();
    sink.json("orders.json", &orders)?;
    Ok(())
}

/// MsFEM-POD expectations against FEM for several offline snapshot counts.
fn q_study(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = with_solver(&exp.uq, SolverKind::MsfemPod);
    let k = cfg.k;
    let base = cfg.offline.clone().expect("checked by the config");
    let samples = sample_sets(&cfg)?;
    let setup = Setup::new(&cfg)?;
    let fem_cfg = with_solver(&cfg, SolverKind::Fem);
    let fem = run_on(&fem_cfg, &setup, None, &samples)?;
    let samplers = if exp.params.offline_samplers.is_empty() {
        vec![base.sampler]
    } else {
        exp.params.offline_samplers.clone()
    };
    let mut rows = Vec::new();
    for smp in samplers {
        for &q in &exp.params.q_values {
            let mut off = base.clone();
            off.q = q;
            off.sampler = smp;
            let c = UqConfig {
                offline: Some(off),
                ..cfg.clone()
            };
            let offline = offline_stage(&c, &setup, &samples)?;
            let r = run_on(&c, &setup, Some(&offline), &samples)?;
            let used = offline.snapshots.len();
            log::info!("{smp:?} q = {q} (used {used}): offline {:.1}s", offline.seconds);
            for j in 0..k {
                rows.push(vec![
                    format!("{smp:?}").to_lowercase(),
                    q.to_string(),
                    used.to_string(),
                    (j + 1).to_string(),
                    num(r.mean[j]),
                    num(fem.mean[j]),
                    num((r.mean[j] - fem.mean[j]).abs()),
                    num(offline.seconds),
                    num(r.timings.online_seconds),
                ]);
            }
        }
    }
    sink.table("q_study.csv", schema::Q_STUDY, &rows)?;
    Ok(())
}

/// `int psi^4 / (int psi^2)^2`, the fourth power integrated with the lumped mass.
pub fn inverse_participation_ratio(op: &AffineOperator, psi: &[f64]) -> f64 {
    let lumped = op.mass.matvec(&vec![1.0; psi.len()]);
    let p4: f64 = lumped.iter().zip(psi).map(|(m, p)| m * p.powi(4)).sum();
    let p2 = op.mass.quad_form(psi);
    p4 / (p2 * p2)
}

/// One realization (`omega` from the config or drawn from the seed): FEM
/// against the configured multiscale solver.
fn localization(exp: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = multiscale(&exp.uq);
    let k = cfg.k;
    let omega = omega_of(exp, true);
    let setup = Setup::new(&cfg)?;
    let fem_cfg = with_solver(&cfg, SolverKind::Fem);
    let fem = solve_sample(&fem_cfg, &setup, None, &omega)?;
    let ms = solve_one(&cfg, &setup, &omega)?;
    check_pairs(&fem, k)?;
    check_pairs(&ms, k)?;
    let op = &setup.op;
    let rows: Vec<Vec<String>> = (0..k)
        .map(|j| {
            let (a, b) = (fem.values[j], ms.values[j]);
            vec![
                (j + 1).to_string(),
                num(a),
                num(b),
                num((b - a).abs()),
                num((b - a).abs() / a.abs()),
                num(inverse_participation_ratio(op, &fem.vectors[j])),
                num(inverse_participation_ratio(op, &ms.vectors[j])),
            ]
        })
        .collect();
    sink.table("eigenvalues.csv", schema::LOCALIZATION, &rows)?;
    sink.field("potential.csv", &setup.fine, &nodal_potential(op, &omega))?;
    for j in 0..k {
        sink.field(&format!("eigenfunction_fem_{}.csv", j + 1), &setup.fine, &fem.vectors[j])?;
        sink.field(&format!("eigenfunction_ms_{}.csv", j + 1), &setup.fine, &ms.vectors[j])?;
    }
    #[derive(Serialize)]
    struct Realization<'a> {
        omega: &'a [f64],
        lambda_fem: &'a [f64],
        lambda_ms: &'a [f64],
    }
    sink.json(
        "summary.json",
        &Realization {
            omega: &omega,
            lambda_fem: &fem.values[..k],
            lambda_ms: &ms.values[..k],
        },
    )?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use specsolve_core::assembly::affine_operator;
    use specsolve_core::mesh::{BoxDomain, FeSpace};
    use specsolve_core::potential::{BasePotential, RandomPotentialSpec};

    #[test]
    fn participation_ratio_limits() {
        let space = FeSpace::uniform(&BoxDomain::interval(0.0, 2.0), &[64]).unwrap();
        let op = affine_operator(&RandomPotentialSpec::deterministic(BasePotential::Constant { value: 1.0 }), &space, 1.0);
        let flat = vec![0.3; 64];
        assert!((inverse_participation_ratio(&op, &flat) - 0.5).abs() < 1e-12);
        // scale invariant, and larger for a concentrated bump
        let bump: Vec<f64> = (0..64).map(|i| (-((i as f64 - 32.0) / 3.0).powi(2)).exp()).collect();
        let scaled: Vec<f64> = bump.iter().map(|b| -4.0 * b).collect();
        let (a, b) = (inverse_participation_ratio(&op, &bump), inverse_participation_ratio(&op, &scaled));
        assert!((a - b).abs() < 1e-12 * a);
        assert!(a > 4.0);
    }

    #[test]
    fn sign_aligned_errors() {
        let space = FeSpace::uniform(&BoxDomain::interval(0.0, 1.0), &[16]).unwrap();
        let op = affine_operator(&RandomPotentialSpec::deterministic(BasePotential::Constant { value: 1.0 }), &space, 1.0);
        let u: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let (l2, h1) = vector_errors(&op, &u, &neg).unwrap();
        assert_eq!((l2, h1), (0.0, 0.0));
    }
}
