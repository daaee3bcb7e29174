//! Fine-mesh vectors that are either global or restricted to a patch of dofs.

use std::sync::Arc;

/// Index set of a [`LocalVector`].
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Every dof `0..n`.
    Full(usize),
    /// Sorted subset of dofs; entries outside are zero.
    Patch(Arc<[usize]>),
}

impl Support {
    pub fn len(&self) -> usize {
        match self {
            Support::Full(n) => *n,
            Support::Patch(idx) => idx.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, k: usize) -> usize {
        match self {
            Support::Full(_) => k,
            Support::Patch(idx) => idx[k],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalVector {
    support: Support,
    values: Vec<f64>,
}

impl LocalVector {
    pub fn full(values: Vec<f64>) -> Self {
        Self {
            support: Support::Full(values.len()),
            values,
        }
    }

    /// Restriction of a full-length vector to `support`.
    pub fn gather(support: Support, full: &[f64]) -> Self {
        let values = match &support {
            Support::Full(n) => {
                assert_eq!(*n, full.len());
                full.to_vec()
            }
            Support::Patch(idx) => idx.iter().map(|&i| full[i]).collect(),
        };
        Self { support, values }
    }

    pub fn zeros(support: Support) -> Self {
        let values = vec![0.0; support.len()];
        Self { support, values }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(global index, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.support.index(k), v))
    }

    /// Writes the values into `out` (other entries untouched).
    pub fn scatter(&self, out: &mut [f64]) {
        match &self.support {
            Support::Full(_) => out.copy_from_slice(&self.values),
            Support::Patch(idx) => {
                for (&i, &v) in idx.iter().zip(&self.values) {
                    out[i] = v;
                }
            }
        }
    }

    /// Resets the entries covered by the support to zero.
    pub fn clear_in(&self, out: &mut [f64]) {
        match &self.support {
            Support::Full(_) => out.iter_mut().for_each(|v| *v = 0.0),
            Support::Patch(idx) => idx.iter().for_each(|&i| out[i] = 0.0),
        }
    }

    pub fn to_full(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.scatter(&mut out);
        out
    }

    /// `sum_k self_k * full_k`.
    pub fn dot_full(&self, full: &[f64]) -> f64 {
        match &self.support {
            Support::Full(_) => crate::sparse::dot(&self.values, full),
            Support::Patch(idx) => idx.iter().zip(&self.values).map(|(&i, &v)| v * full[i]).sum(),
        }
    }

    /// `self += a * other` for vectors on the same support.
    pub fn axpy(&mut self, a: f64, other: &LocalVector) {
        assert_eq!(self.support, other.support);
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
