//! Anything that can score a latent state: trained networks, exact oracles, and
//! analytic test doubles all plug into the monitor and the steering filter
//! through [`ValueFunction`].

use crate::error::Result;
use crate::trajectory::ensure_dim;

pub trait ValueFunction: Sync {
    fn input_dim(&self) -> usize;

    /// Value at `z`. Callers guarantee `z.len() == self.input_dim()`.
    fn value(&self, z: &[f64]) -> f64;
}

pub(crate) fn check_input<V: ValueFunction + ?Sized>(vf: &V, z: &[f64]) -> Result<()> {
    ensure_dim(vf.input_dim(), z.len())
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        (**self).value(z)
    }
}

/// A constant value everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantValue {
    pub dim: usize,
    pub value: f64,
}

impl ValueFunction for ConstantValue {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _z: &[f64]) -> f64 {
        self.value
    }
}

/// Wraps a closure as a value function.
pub struct FnValue<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnValue<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ValueFunction for FnValue<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }
}
