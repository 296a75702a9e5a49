//! Maximum-likelihood fitting of covariance hyperparameters.
//!
//! Both the single-fidelity and the multifidelity surrogate expose their
//! covariance as a [`Covariance`] over a fixed training set. The fitter runs
//! a bound-constrained BFGS ascent on the log marginal likelihood from
//! several starting points and keeps the best result. Every accepted step
//! strictly increases the likelihood.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dot, factor_with_jitter, Matrix};
use crate::{math, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub(crate) trait Covariance {
    fn n_params(&self) -> usize;

    /// Training covariance for parameters `p`. When `grads` is given it is
    /// filled with `∂K/∂p_k` for every parameter.
    fn matrix(&self, p: &[f64], grads: Option<&mut Vec<Matrix>>) -> Matrix;
}

/// Noise and jitter settings shared by the likelihood evaluations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Regularization {
    pub noise: f64,
    pub jitter: f64,
}

impl Regularization {
    /// Largest jitter tried for a system whose kernel diagonal peaks at `diag`.
    pub fn max_jitter(&self, diag: f64) -> f64 {
        (1e-2 * diag).max(self.jitter)
    }
}

pub(crate) fn max_diagonal(k: &Matrix) -> f64 {
    (0..k.rows()).map(|i| k[(i, i)]).fold(0.0, f64::max)
}

/// Log marginal likelihood and, optionally, its gradient.
pub(crate) fn log_likelihood<C: Covariance>(
    cov: &C,
    p: &[f64],
    y: &[f64],
    reg: Regularization,
    with_grad: bool,
) -> Option<(f64, Vec<f64>)> {
    let mut grads = Vec::new();
    let mut k = cov.matrix(p, if with_grad { Some(&mut grads) } else { None });
    let max_jitter = reg.max_jitter(max_diagonal(&k));
    k.add_diagonal(reg.noise);
    let (chol, _) = factor_with_jitter(&k, reg.jitter, max_jitter).ok()?;
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let value = -0.5 * dot(y, &alpha) - 0.5 * chol.log_det() - 0.5 * n * LN_2PI;
    if !value.is_finite() {
        return None;
    }
    if !with_grad {
        return Some((value, Vec::new()));
    }
    let inv = chol.inverse();
    let size = y.len();
    let mut w = inv;
    for i in 0..size {
        for j in 0..size {
            w[(i, j)] = alpha[i] * alpha[j] - w[(i, j)];
        }
    }
    let grad = grads
        .iter()
        .map(|dk| 0.5 * dot(w.as_slice(), dk.as_slice()))
        .collect();
    Some((value, grad))
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Gradient with components that push against an active bound removed.
fn free_gradient(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((xi, gi), (lo, hi))| {
            if (*xi <= *lo && *gi < 0.0) || (*xi >= *hi && *gi > 0.0) {
                0.0
            } else {
                *gi
            }
        })
        .collect()
}

/// Bound-constrained BFGS ascent. Returns `None` only if `f` fails at the
/// starting point.
pub(crate) fn maximize<F>(
    mut f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    max_iter: usize,
) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x)?;
    let mut h = Matrix::identity(n);
    let mut h_is_identity = true;

    for _ in 0..max_iter {
        let pg = free_gradient(&x, &g, bounds);
        if pg.iter().all(|v| v.abs() < 1e-7) {
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| dot(h.row(i), &g)).collect();
        for i in 0..n {
            let (lo, hi) = bounds[i];
            if (x[i] <= lo && d[i] < 0.0) || (x[i] >= hi && d[i] > 0.0) {
                d[i] = 0.0;
            }
        }
        if dot(&d, &pg) <= 0.0 {
            h = Matrix::identity(n);
            h_is_identity = true;
            d = pg.clone();
        }
        let dmax = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if dmax > 3.0 {
            d.iter_mut().for_each(|v| *v *= 3.0 / dmax);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn, bounds);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if s.iter().all(|v| *v == 0.0) {
                break;
            }
            let slope = dot(&g, &s).max(0.0);
            if let Some((fnew, gnew)) = f(&xn) {
                if fnew >= fx + 1e-4 * slope && fnew > fx {
                    accepted = Some((xn, s, fnew, gnew));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((xn, s, fnew, gnew)) = accepted else {
            if h_is_identity {
                break;
            }
            h = Matrix::identity(n);
            h_is_identity = true;
            continue;
        };

        // Curvature pair for the minimization of -f.
        let yv: Vec<f64> = g.iter().zip(&gnew).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(h.row(i), &yv)).collect();
            let yhy = dot(&yv, &hy);
            let mut updated = h.clone();
            for i in 0..n {
                for j in 0..n {
                    updated[(i, j)] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            h = updated;
            h_is_identity = false;
        }

        let gain = fnew - fx;
        x = xn;
        fx = fnew;
        g = gnew;
        if gain < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((x, fx))
}

#[derive(Debug, Clone)]
pub(crate) struct FitOutcome {
    pub params: Vec<f64>,
    /// Likelihood at each restart's starting point (`-inf` when the system
    /// could not be factored there).
    pub initial_log_likelihoods: Vec<f64>,
}

/// Multi-start maximum likelihood. The first start is `start`; the rest are
/// drawn uniformly inside `bounds` from a generator seeded with `seed`.
pub(crate) fn fit<C: Covariance>(
    cov: &C,
    y: &[f64],
    reg: Regularization,
    bounds: &[(f64, f64)],
    start: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<FitOutcome> {
    debug_assert_eq!(bounds.len(), cov.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut initial = Vec::with_capacity(restarts);
    for r in 0..restarts.max(1) {
        let mut x0 = if r == 0 {
            start.to_vec()
        } else {
            bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect()
        };
        project(&mut x0, bounds);
        let init = log_likelihood(cov, &x0, y, reg, false).map_or(f64::NEG_INFINITY, |v| v.0);
        initial.push(init);
        let objective = |p: &[f64]| log_likelihood(cov, p, y, reg, true);
        if let Some((x, fx)) = maximize(objective, &x0, bounds, 200) {
            if best.as_ref().map_or(true, |(_, b)| fx > *b) {
                best = Some((x, fx));
            }
        }
    }
    let (params, _) = best.ok_or(Error::NotPositiveDefinite { jitter: reg.jitter })?;
    Ok(FitOutcome { params, initial_log_likelihoods: initial })
}

/// `[ln lo, ln hi]` with `hi` forced above `lo`.
pub(crate) fn log_bounds(lo: f64, hi: f64) -> (f64, f64) {
    let hi = hi.max(lo * 1.000_001);
    (math::ln(lo), math::ln(hi))
}

/// Shape-only helper: `n × n` zero matrices, one per parameter.
pub(crate) fn zero_grads(count: usize, n: usize) -> Vec<Matrix> {
    vec![Matrix::zeros(n, n); count]
}
