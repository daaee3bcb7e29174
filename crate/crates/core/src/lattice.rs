//! Randomly shifted rank-1 lattice rules and plain Monte Carlo points.
//!
//! Points live in `[-1/2, 1/2)^s`, matching the parameter box of the
//! random potentials.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of random shifts.
pub const DEFAULT_SHIFTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeRule {
    pub n: usize,
    pub s: usize,
    pub z: Vec<u64>,
    pub shifts: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LatticeRule {
    /// Rule with `r` shifts drawn uniformly from `[0,1)^s`.
    pub fn new(n: usize, z: Vec<u64>, r: usize, seed: u64) -> Result<Self> {
        let s = z.len();
        if n == 0 {
            return Err(Error::InvalidArgument("lattice rule needs N >= 1".into()));
        }
        if let Some(&bad) = z.iter().find(|&&zj| zj == 0 || zj as usize >= n.max(2)) {
            return Err(Error::InvalidArgument(format!(
                "generating vector entry {bad} outside 1..{n}"
            )));
        }
        Ok(Self {
            n,
            s,
            z,
            shifts: random_shifts(seed, r, s),
            seed,
        })
    }

    /// Rule whose single shift is zero (the unshifted lattice).
    pub fn unshifted(n: usize, z: Vec<u64>) -> Result<Self> {
        let mut rule = Self::new(n, z, 0, 0)?;
        rule.shifts = vec![vec![0.0; rule.s]];
        Ok(rule)
    }

    /// CBC rule with default product weights `j^-2`.
    pub fn cbc(n: usize, s: usize, r: usize, seed: u64) -> Result<Self> {
        let z = cbc_generating_vector(n, s, &default_weights(s))?;
        Self::new(n, z, r, seed)
    }

    pub fn num_shifts(&self) -> usize {
        self.shifts.len()
    }

    pub fn point(&self, j: usize, shift_index: usize) -> Vec<f64> {
        let delta = &self.shifts[shift_index];
        let jn = j as u128;
        self.z
            .iter()
            .zip(delta)
            .map(|(&zk, &d)| {
                let r = (jn * zk as u128 % self.n as u128) as f64 / self.n as f64;
                wrap_unit(r + d) - 0.5
            })
            .collect()
    }
}

/// Point `j = frac(j z / N + shift) - 1/2` for `j = 0..N-1`.
pub fn lattice_points(rule: &LatticeRule, shift_index: usize) -> Result<Vec<Vec<f64>>> {
    if shift_index >= rule.shifts.len() {
        return Err(Error::InvalidArgument(format!(
            "shift {shift_index} of {}",
            rule.shifts.len()
        )));
    }
    Ok((0..rule.n).map(|j| rule.point(j, shift_index)).collect())
}

fn wrap_unit(x: f64) -> f64 {
    let f = x - x.floor();
    // x - floor(x) can round up to exactly 1 for tiny negative x
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

pub fn random_shifts(seed: u64, r: usize, s: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r)
        .map(|_| (0..s).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// `N` i.i.d. uniform points in `[-1/2, 1/2)^s`.
pub fn mc_points(seed: u64, n: usize, s: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..s).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect()
}

pub fn default_weights(s: usize) -> Vec<f64> {
    (1..=s).map(|j| 1.0 / (j * j) as f64).collect()
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Largest prime `<= n` (used to turn round sample counts into valid CBC sizes).
pub fn prime_at_most(n: usize) -> Option<usize> {
    (2..=n).rev().find(|&p| is_prime(p))
}

/// Smallest prime `>= n`.
pub fn prime_at_least(n: usize) -> usize {
    (n.max(2)..).find(|&p| is_prime(p)).unwrap()
}

pub fn euler_totient(n: usize) -> usize {
    let mut result = n;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if m > 1 {
        result -= result / m;
    }
    result
}

fn b2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

/// Squared shift-averaged worst-case error for product weights:
/// `-1 + (1/N) sum_k prod_j (1 + gamma_j B2({k z_j / N}))`.
pub fn shift_averaged_error(n: usize, z: &[u64], weights: &[f64]) -> f64 {
    let table: Vec<f64> = (0..n).map(|r| b2(r as f64 / n as f64)).collect();
    let mut sum = 0.0;
    for k in 0..n {
        let mut prod = 1.0;
        for (&zj, &g) in z.iter().zip(weights) {
            prod *= 1.0 + g * table[(k as u128 * zj as u128 % n as u128) as usize];
        }
        sum += prod;
    }
    sum / n as f64 - 1.0
}

/// Component-by-component construction. Each new component minimizes the
/// criterion over `1..N-1`; near-ties go to the smallest candidate.
pub fn cbc_generating_vector(n: usize, s: usize, weights: &[f64]) -> Result<Vec<u64>> {
    if !is_prime(n) {
        return Err(Error::InvalidArgument(format!("CBC needs prime N, got {n}")));
    }
    if weights.len() < s {
        return Err(Error::DimensionMismatch {
            expected: s,
            got: weights.len(),
        });
    }
    if let Some(g) = weights.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::InvalidArgument(format!("CBC weight {g} must be positive")));
    }
    if s == 0 {
        return Ok(Vec::new());
    }
    let table: Vec<f64> = (0..n).map(|r| b2(r as f64 / n as f64)).collect();
    let mut z = vec![1u64];
    // running products over already chosen components, indexed by k
    let mut prod: Vec<f64> = (0..n).map(|k| 1.0 + weights[0] * table[k]).collect();
    for &g in weights.iter().take(s).skip(1) {
        let scores: Vec<f64> = (1..n)
            .into_par_iter()
            .map(|c| {
                let mut sum = 0.0;
                let mut r = 0usize;
                for &p in prod.iter() {
                    sum += p * (1.0 + g * table[r]);
                    r += c;
                    if r >= n {
                        r -= n;
                    }
                }
                sum
            })
            .collect();
        let mut best = 0;
        for (i, &v) in scores.iter().enumerate().skip(1) {
            if v < scores[best] - 1e-13 * scores[best].abs() {
                best = i;
            }
        }
        let c = best + 1;
        let mut r = 0usize;
        for p in prod.iter_mut() {
            *p *= 1.0 + g * table[r];
            r += c;
            if r >= n {
                r -= n;
            }
        }
        z.push(c as u64);
    }
    Ok(z)
}

/// Text format: first line `N s`, then one component per line.
pub fn write_generating_vector(path: &Path, n: usize, z: &[u64]) -> Result<()> {
    let mut out = format!("{} {}\n", n, z.len());
    for zj in z {
        writeln!(out, "{zj}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_generating_vector(path: &Path) -> Result<(usize, Vec<u64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Format("empty generating vector file".into()))?;
    let mut it = head.split_whitespace();
    let parse = |t: Option<&str>| -> Result<usize> {
        t.and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header line {head:?}")))
    };
    let n = parse(it.next())?;
    let s = parse(it.next())?;
    let z = lines
        .map(|l| {
            l.trim()
                .parse::<u64>()
                .map_err(|_| Error::Format(format!("bad component {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if z.len() != s {
        return Err(Error::Format(format!("header says s = {s}, found {} components", z.len())));
    }
    Ok((n, z))
}
