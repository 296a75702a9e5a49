//! Anisotropic squared-exponential covariance.

use alloc::vec::Vec;

use crate::{math, Error, Result};

/// `k(x, x') = variance · exp(-½ Σ_j ((x_j - x'_j) / ℓ_j)²)`
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    variance: f64,
    lengthscales: Vec<f64>,
}

impl Kernel {
    pub fn new(variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter("kernel variance must be positive"));
        }
        if lengthscales.is_empty() {
            return Err(Error::Empty("lengthscales"));
        }
        if lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("lengthscales must be positive"));
        }
        Ok(Kernel { variance, lengthscales })
    }

    /// Isotropic kernel in `dim` dimensions.
    pub fn isotropic(variance: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Kernel::new(variance, alloc::vec![lengthscale; dim])
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.variance * math::exp(-0.5 * self.scaled_sq_dist(x, y))
    }

    #[inline]
    pub(crate) fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let r = (a - b) / l;
                r * r
            })
            .sum()
    }

    /// Log-space parameter vector `[ln σ², ln ℓ_1, …, ln ℓ_d]`.
    pub(crate) fn log_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 + self.dim());
        p.push(math::ln(self.variance));
        p.extend(self.lengthscales.iter().map(|l| math::ln(*l)));
        p
    }

    pub(crate) fn from_log_params(p: &[f64]) -> Kernel {
        Kernel {
            variance: math::exp(p[0]),
            lengthscales: p[1..].iter().map(|v| math::exp(*v)).collect(),
        }
    }
}
