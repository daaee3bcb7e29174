//! Deterministic test potentials and the truncated affine random potential
//! `V(x, w) = v0(x) + sum_j w_j v_j(x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, Point};

/// `(x^2 - 4)^2`, minima at `x = +-2`.
pub fn double_well(x: f64) -> f64 {
    let t = x * x - 4.0;
    t * t
}

/// Checkerboard of squares of side `square_size`; square `(m, n)` with
/// `m = floor(x / size)`, `n = floor(y / size)` takes `hi` when `m + n` is even.
pub fn checkerboard(p: Point, square_size: f64, lo: f64, hi: f64) -> f64 {
    let m = (p[0] / square_size).floor() as i64;
    let n = (p[1] / square_size).floor() as i64;
    if (m + n).rem_euclid(2) == 0 {
        hi
    } else {
        lo
    }
}

/// User-supplied closed-form potential with known bounds.
#[derive(Clone)]
pub struct ClosedForm {
    pub f: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub min: f64,
    pub max: f64,
}

impl fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosedForm([{}, {}])", self.min, self.max)
    }
}

/// Same function object and bounds.
impl PartialEq for ClosedForm {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f) && self.min == other.min && self.max == other.max
    }
}

/// Deterministic part `v0` of the potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasePotential {
    Constant {
        value: f64,
    },
    DoubleWell,
    Checkerboard {
        square_size: f64,
        lo: f64,
        hi: f64,
    },
    #[serde(skip)]
    ClosedForm(ClosedForm),
}

impl BasePotential {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            BasePotential::Constant { value } => *value,
            BasePotential::DoubleWell => double_well(p[0]),
            BasePotential::Checkerboard {
                square_size,
                lo,
                hi,
            } => checkerboard(p, *square_size, *lo, *hi),
            BasePotential::ClosedForm(c) => (c.f)(p),
        }
    }

    /// `(inf, sup)` of `v0` over the domain.
    pub fn range(&self, domain: &BoxDomain) -> (f64, f64) {
        match self {
            BasePotential::Constant { value } => (*value, *value),
            BasePotential::DoubleWell => {
                let (a, b) = (domain.lower[0], domain.upper[0]);
                let mut candidates = vec![a, b];
                candidates.extend([-2.0, 0.0, 2.0].into_iter().filter(|x| (a..=b).contains(x)));
                let vals = candidates.iter().map(|&x| double_well(x));
                (
                    vals.clone().fold(f64::INFINITY, f64::min),
                    vals.fold(f64::NEG_INFINITY, f64::max),
                )
            }
            BasePotential::Checkerboard { lo, hi, .. } => (lo.min(*hi), lo.max(*hi)),
            BasePotential::ClosedForm(c) => (c.min, c.max),
        }
    }
}

/// Amplitude law of the random modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    /// `sigma / j^q`.
    Power,
    /// `sigma / (1 + (j pi)^q)`.
    Rational,
}

/// Spatial shape of mode `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeShape {
    /// `sin(j pi x)`.
    Sine,
    /// `sin(j pi x) sin(j pi y)`.
    SineProduct,
}

/// Truncated random potential with `s` modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomPotentialSpec {
    pub v0: BasePotential,
    #[serde(default)]
    pub s: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default = "default_law")]
    pub law: AmplitudeLaw,
    #[serde(default = "default_shape")]
    pub shape: ModeShape,
}

fn one() -> f64 {
    1.0
}

fn default_law() -> AmplitudeLaw {
    AmplitudeLaw::Power
}

fn default_shape() -> ModeShape {
    ModeShape::Sine
}

impl RandomPotentialSpec {
    /// Deterministic potential (no random modes).
    pub fn deterministic(v0: BasePotential) -> Self {
        Self {
            v0,
            s: 0,
            sigma: 1.0,
            q: 0.0,
            law: AmplitudeLaw::Power,
            shape: ModeShape::Sine,
        }
    }

    /// `1 + sum_j sin(j pi x) / (1 + (j pi)^q) w_j`.
    pub fn rational_1d(s: usize, q: f64) -> Self {
        Self {
            v0: BasePotential::Constant { value: 1.0 },
            s,
            sigma: 1.0,
            q,
            law: AmplitudeLaw::Rational,
            shape: ModeShape::Sine,
        }
    }

    /// `v0 + sigma sum_j j^-q sin(j pi x) [sin(j pi y)] w_j`.
    pub fn power(v0: f64, sigma: f64, q: f64, s: usize, shape: ModeShape) -> Self {
        Self {
            v0: BasePotential::Constant { value: v0 },
            s,
            sigma,
            q,
            law: AmplitudeLaw::Power,
            shape,
        }
    }

    /// Same potential truncated to `s` modes.
    pub fn truncated(&self, s: usize) -> Self {
        Self { s, ..self.clone() }
    }

    /// Amplitude of mode `j >= 1`.
    pub fn amplitude(&self, j: usize) -> f64 {
        let j = j as f64;
        match self.law {
            AmplitudeLaw::Power => self.sigma / j.powf(self.q),
            AmplitudeLaw::Rational => self.sigma / (1.0 + (j * PI).powf(self.q)),
        }
    }

    /// Shape of mode `j` without amplitude.
    pub fn shape_value(&self, j: usize, p: Point) -> f64 {
        let k = j as f64 * PI;
        match self.shape {
            ModeShape::Sine => (k * p[0]).sin(),
            ModeShape::SineProduct => (k * p[0]).sin() * (k * p[1]).sin(),
        }
    }

    /// `v_j(x)` for `j >= 1`.
    pub fn mode(&self, j: usize, p: Point) -> f64 {
        self.amplitude(j) * self.shape_value(j, p)
    }

    /// `V(x, w)`.
    pub fn eval(&self, omega: &[f64], p: Point) -> Result<f64> {
        if omega.len() != self.s {
            return Err(Error::DimensionMismatch {
                expected: self.s,
                got: omega.len(),
            });
        }
        Ok(self.v0.eval(p)
            + omega
                .iter()
                .enumerate()
                .map(|(j, w)| w * self.mode(j + 1, p))
                .sum::<f64>())
    }

    /// `sum_j |amplitude_j|`; shapes are bounded by one.
    pub fn envelope(&self) -> f64 {
        (1..=self.s).map(|j| self.amplitude(j).abs()).sum()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Envelope bounds of `V` over the domain and `w in [-1/2, 1/2]^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialBounds {
    pub v_min: f64,
    pub v_max: f64,
    /// `v_min >= 0`: the positivity assumption of the eigenvalue problem holds.
    pub nonnegative: bool,
}

pub fn potential_bounds(spec: &RandomPotentialSpec, domain: &BoxDomain) -> PotentialBounds {
    let (lo, hi) = spec.v0.range(domain);
    let half = 0.5 * spec.envelope();
    let v_min = lo - half;
    PotentialBounds {
        v_min,
        v_max: hi + half,
        nonnegative: v_min >= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(2.0), 0.0);
        assert_eq!(double_well(0.0), 16.0);
        assert_eq!(double_well(-2.0), 0.0);
    }

    #[test]
    fn checkerboard_pattern() {
        let size = 1.0 / 16.0;
        let v = |x: f64, y: f64| checkerboard([x, y], size, 0.0, 2.0);
        // 16 x 16 squares on [-1/2, 1/2]^2: count distinct squares along an axis
        let mut switches = 0;
        let mut prev = v(-0.5 + 1e-9, 0.01);
        for i in 1..1600 {
            let cur = v(-0.5 + i as f64 / 1600.0 + 1e-9, 0.01);
            if cur != prev {
                switches += 1;
            }
            prev = cur;
        }
        assert_eq!(switches, 15);
        assert_eq!(v(0.01, 0.01), v(0.05, 0.02));
        let (a, b) = (v(0.01, 0.01), v(0.01 + size, 0.01));
        assert_eq!(a + b, 2.0);
        assert!(a == 0.0 || a == 2.0);
        // (0,0) square has even parity
        assert_eq!(a, 2.0);
    }

    #[test]
    fn random_potential_examples() {
        let spec = RandomPotentialSpec::rational_1d(3, 2.0);
        assert_eq!(spec.eval(&[0.0; 3], [0.3, 0.0]).unwrap(), 1.0);

        let spec = RandomPotentialSpec::rational_1d(1, 2.0);
        let v = spec.eval(&[0.5], [0.5, 0.0]).unwrap();
        assert!((v - (1.0 + 0.5 * 1.0 / (1.0 + PI * PI))).abs() < 1e-15);

        let spec = RandomPotentialSpec::power(1.0, 1.0, 0.0, 2, ModeShape::SineProduct);
        let v = spec.eval(&[0.5, -0.5], [0.5, 0.5]).unwrap();
        assert!((v - 1.5).abs() < 1e-15);

        assert!(spec.eval(&[0.5], [0.5, 0.5]).is_err());
    }

    #[test]
    fn bounds_examples() {
        let d = BoxDomain::interval(-1.0, 1.0);
        let b = potential_bounds(
            &RandomPotentialSpec::deterministic(BasePotential::Constant { value: 1.0 }),
            &d,
        );
        assert_eq!((b.v_min, b.v_max), (1.0, 1.0));

        let spec = RandomPotentialSpec::rational_1d(12, 2.0);
        let direct: f64 = (1..=12).map(|j| 1.0 / (1.0 + (j as f64 * PI).powi(2))).sum();
        let b = potential_bounds(&spec, &d);
        assert!((b.v_max - (1.0 + 0.5 * direct)).abs() < 1e-15);

        let spec = RandomPotentialSpec::power(1.0, 1.0, 0.0, 256, ModeShape::Sine);
        let b = potential_bounds(&spec, &d);
        assert_eq!(b.v_max, 129.0);
        assert!(!b.nonnegative);

        let dw = RandomPotentialSpec::deterministic(BasePotential::DoubleWell);
        let b = potential_bounds(&dw, &BoxDomain::interval(-4.0, 4.0));
        assert_eq!((b.v_min, b.v_max), (0.0, 144.0));
    }

    #[test]
    fn sampled_values_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [
            (RandomPotentialSpec::rational_1d(16, 4.0 / 3.0), BoxDomain::interval(-1.0, 1.0)),
            (
                RandomPotentialSpec::power(3.0, 0.7, 1.0, 9, ModeShape::SineProduct),
                BoxDomain::square(0.0, 1.0),
            ),
        ];
        for (spec, dom) in &cases {
            let b = potential_bounds(spec, dom);
            for _ in 0..5000 {
                let omega: Vec<f64> = (0..spec.s).map(|_| rng.random::<f64>() - 0.5).collect();
                let p = [
                    dom.lower[0] + rng.random::<f64>() * dom.length(0),
                    dom.lower[dom.dim() - 1] + rng.random::<f64>() * dom.length(dom.dim() - 1),
                ];
                let v = spec.eval(&omega, p).unwrap();
                assert!(v >= b.v_min - 1e-14 && v <= b.v_max + 1e-14);
            }
        }
    }

    #[test]
    fn envelope_decreases_with_q() {
        for s in [1, 5, 40] {
            let mut prev = f64::INFINITY;
            for q in [0.0, 0.5, 4.0 / 3.0, 2.0, 3.0] {
                let e = RandomPotentialSpec::power(0.0, 1.0, q, s, ModeShape::Sine).envelope();
                assert!(e <= prev);
                prev = e;
            }
        }
    }

    #[test]
    fn hash_is_stable() {
        let a = RandomPotentialSpec::rational_1d(8, 3.0);
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), a.truncated(4).hash());
    }

    proptest! {
        #[test]
        fn affine_in_omega(
            w1 in proptest::collection::vec(-0.5f64..0.5, 6),
            w2 in proptest::collection::vec(-0.5f64..0.5, 6),
            a in 0.0f64..1.0,
            x in -1.0f64..1.0,
        ) {
            let spec = RandomPotentialSpec::rational_1d(6, 4.0 / 3.0);
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(p, q)| a * p + (1.0 - a) * q).collect();
            let lhs = spec.eval(&mix, [x, 0.0]).unwrap();
            let rhs = a * spec.eval(&w1, [x, 0.0]).unwrap() + (1.0 - a) * spec.eval(&w2, [x, 0.0]).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
