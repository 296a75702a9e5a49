//! Standard normal helpers, quantiles and the convergence metric.

use alloc::vec::Vec;

use crate::math;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * math::exp(-0.5 * z * z)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * math::erfc(-z / core::f64::consts::SQRT_2)
}

/// Quantile of `values` at level `p ∈ [0, 1]`, interpolating linearly
/// between the closest order statistics. Returns `None` for an empty input.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// [`quantile`] for data already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let p = p.clamp(0.0, 1.0);
    let h = p * (sorted.len() - 1) as f64;
    let lo = math::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Root squared error between the incumbent value and the known optimum.
pub fn compute_rse(best_value: f64, true_optimum: f64) -> f64 {
    let diff = best_value - true_optimum;
    math::sqrt(diff * diff)
}
