//! Autoregressive multifidelity Gaussian process.
//!
//! Level `m` is modelled as `f_m(x) = ρ_m f_{m-1}(x) + δ_m(x)` with
//! independent GP priors on `f_0` and on every bias `δ_m`. Unrolling the
//! recursion gives `f_m = Σ_{s ≤ m} c(m, s) δ_s` with `δ_0 = f_0` and
//! `c(m, s) = ρ_{s+1} ⋯ ρ_m`, so
//!
//! `cov(f_m(x), f_l(x')) = Σ_{s ≤ min(m, l)} c(m, s) c(l, s) κ_s(x, x')`.
//!
//! All observations are stacked into one joint kernel system and the level
//! kernels together with the `ρ` factors are fitted by maximizing the joint
//! log marginal likelihood.

use alloc::vec::Vec;

use crate::gp::{self, FittedSystem, GpConfig, OutputScaling};
use crate::hyperopt::{self, Covariance, Regularization};
use crate::kernel::Kernel;
use crate::linalg::{dot, Matrix};
use crate::{math, Error, Result};

/// One evaluation: input point, fidelity level and observed value.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub level: usize,
    pub value: f64,
}

impl Observation {
    pub fn new(point: Vec<f64>, level: usize, value: f64) -> Self {
        Observation { point, level, value }
    }
}

/// Training data across `levels` fidelities.
#[derive(Debug, Clone, PartialEq)]
pub struct MfDataset {
    levels: usize,
    observations: Vec<Observation>,
}

impl MfDataset {
    pub fn new(levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidParameter("at least one fidelity level is required"));
        }
        Ok(MfDataset { levels, observations: Vec::new() })
    }

    pub fn from_observations(levels: usize, observations: Vec<Observation>) -> Result<Self> {
        let mut data = MfDataset::new(levels)?;
        for obs in observations {
            data.push(obs)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if obs.level >= self.levels {
            return Err(Error::InvalidFidelity { level: obs.level, levels: self.levels });
        }
        if let Some(first) = self.observations.first() {
            if first.point.len() != obs.point.len() {
                return Err(Error::DimensionMismatch { expected: first.point.len(), found: obs.point.len() });
            }
        }
        self.observations.push(obs);
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn count_at(&self, level: usize) -> usize {
        self.observations.iter().filter(|o| o.level == level).count()
    }

    /// Lowest observed value at the highest fidelity, with its point.
    pub fn best_top(&self) -> Option<(&[f64], f64)> {
        let top = self.levels - 1;
        self.observations
            .iter()
            .filter(|o| o.level == top)
            .fold(None, |best: Option<&Observation>, o| match best {
                Some(b) if b.value <= o.value => Some(b),
                _ => Some(o),
            })
            .map(|o| (o.point.as_slice(), o.value))
    }
}

/// Level kernels and transition factors of the autoregressive prior.
#[derive(Debug, Clone, PartialEq)]
pub struct MfKernel {
    levels: Vec<Kernel>,
    rho: Vec<f64>,
}

impl MfKernel {
    /// `levels[0]` is the base kernel, `levels[m]` the bias kernel of level
    /// `m`; `rho[m - 1]` scales level `m - 1` into level `m`.
    pub fn new(levels: Vec<Kernel>, rho: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty("level kernels"));
        }
        if rho.len() + 1 != levels.len() {
            return Err(Error::DimensionMismatch { expected: levels.len() - 1, found: rho.len() });
        }
        let d = levels[0].dim();
        if let Some(k) = levels.iter().find(|k| k.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: k.dim() });
        }
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("scale factors must be finite"));
        }
        Ok(MfKernel { levels, rho })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn level_kernels(&self) -> &[Kernel] {
        &self.levels
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `c(m, s) = ρ_{s+1} ⋯ ρ_m`.
    fn coeff(&self, m: usize, s: usize) -> f64 {
        self.rho[s..m].iter().product()
    }

    /// `∂c(m, s)/∂ρ_r`.
    fn coeff_grad(&self, m: usize, s: usize, r: usize) -> f64 {
        if !(s < r && r <= m) {
            return 0.0;
        }
        (s + 1..=m).filter(|t| *t != r).map(|t| self.rho[t - 1]).product()
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.n_levels() {
            return Err(Error::InvalidFidelity { level, levels: self.n_levels() });
        }
        Ok(())
    }

    /// Prior covariance `cov(f_m(x), f_l(x'))`.
    pub fn eval(&self, x: &[f64], m: usize, y: &[f64], l: usize) -> Result<f64> {
        self.check_level(m)?;
        self.check_level(l)?;
        self.levels[0].check(x)?;
        self.levels[0].check(y)?;
        Ok(self.eval_unchecked(x, m, y, l))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], m: usize, y: &[f64], l: usize) -> f64 {
        let lo = m.min(l);
        (0..=lo)
            .map(|s| self.coeff(m, s) * self.coeff(l, s) * self.levels[s].eval_unchecked(x, y))
            .sum()
    }

    fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.levels.iter().flat_map(|k| k.log_params()).collect();
        p.extend_from_slice(&self.rho);
        p
    }

    fn from_params(p: &[f64], levels: usize, dim: usize) -> MfKernel {
        let stride = 1 + dim;
        let kernels = (0..levels)
            .map(|s| Kernel::from_log_params(&p[s * stride..(s + 1) * stride]))
            .collect();
        MfKernel { levels: kernels, rho: p[levels * stride..].to_vec() }
    }
}

/// Joint covariance over stacked observations.
struct MfCovariance<'a> {
    inputs: &'a [Observation],
    levels: usize,
    dim: usize,
}

impl Covariance for MfCovariance<'_> {
    fn n_params(&self) -> usize {
        self.levels * (1 + self.dim) + self.levels - 1
    }

    fn matrix(&self, p: &[f64], grads: Option<&mut Vec<Matrix>>) -> Matrix {
        let kernel = MfKernel::from_params(p, self.levels, self.dim);
        let n = self.inputs.len();
        let stride = 1 + self.dim;
        let mut k = Matrix::zeros(n, n);
        let mut grads = grads;
        if let Some(g) = grads.as_deref_mut() {
            *g = hyperopt::zero_grads(self.n_params(), n);
        }
        let rho_offset = self.levels * stride;
        for i in 0..n {
            for j in 0..=i {
                let (a, b) = (&self.inputs[i], &self.inputs[j]);
                let lo = a.level.min(b.level);
                let mut total = 0.0;
                for s in 0..=lo {
                    let ks = &kernel.levels[s];
                    let base = ks.eval_unchecked(&a.point, &b.point);
                    let weight = kernel.coeff(a.level, s) * kernel.coeff(b.level, s);
                    total += weight * base;
                    if let Some(g) = grads.as_deref_mut() {
                        let v = weight * base;
                        let off = s * stride;
                        g[off][(i, j)] = v;
                        g[off][(j, i)] = v;
                        for t in 0..self.dim {
                            let r = (a.point[t] - b.point[t]) / ks.lengthscales()[t];
                            let dv = v * r * r;
                            g[off + 1 + t][(i, j)] = dv;
                            g[off + 1 + t][(j, i)] = dv;
                        }
                        for r in 1..self.levels {
                            let dw = kernel.coeff_grad(a.level, s, r) * kernel.coeff(b.level, s)
                                + kernel.coeff(a.level, s) * kernel.coeff_grad(b.level, s, r);
                            if dw != 0.0 {
                                let idx = rho_offset + r - 1;
                                g[idx][(i, j)] += dw * base;
                                if i != j {
                                    g[idx][(j, i)] += dw * base;
                                }
                            }
                        }
                    }
                }
                k[(i, j)] = total;
                k[(j, i)] = total;
            }
        }
        k
    }
}

/// Posterior at one point for a requested level, together with the top
/// level and their cross-covariance (all in output units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfPosteriorPrediction {
    pub level: usize,
    pub mean: f64,
    pub variance: f64,
    pub top_mean: f64,
    pub top_variance: f64,
    /// `cov(f_level(x), f_top(x) | data)`.
    pub cross_covariance: f64,
    /// Posterior variances below this value cannot be told apart from zero
    /// given the diagonal jitter of the cached system.
    pub variance_floor: f64,
}

/// Fitted multifidelity surrogate.
#[derive(Debug, Clone)]
pub struct MfGpModel {
    data: MfDataset,
    kernel: MfKernel,
    config: GpConfig,
    system: FittedSystem,
    initial_log_likelihoods: Vec<f64>,
}

fn validate_dataset(data: &MfDataset, config: &GpConfig) -> Result<usize> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    for level in 0..data.levels() {
        if data.count_at(level) == 0 {
            return Err(Error::MissingLevel(level));
        }
    }
    let obs = data.observations();
    let d = obs[0].point.len();
    if d == 0 {
        return Err(Error::Empty("input dimension"));
    }
    if obs.iter().any(|o| !o.value.is_finite() || o.point.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidParameter("training data must be finite"));
    }
    if config.noise_variance == 0.0 {
        for (i, a) in obs.iter().enumerate() {
            if obs[..i].iter().any(|b| b.level == a.level && b.point == a.point) {
                return Err(Error::Precondition("duplicate observation at the same fidelity"));
            }
        }
    }
    Ok(d)
}

/// Fits level kernels and scale factors jointly by maximum likelihood.
pub fn fit_mf_gp(data: &MfDataset, config: &GpConfig) -> Result<MfGpModel> {
    let d = validate_dataset(data, config)?;
    let levels = data.levels();
    let obs = data.observations();
    let y: Vec<f64> = obs.iter().map(|o| o.value).collect();
    let scaling = OutputScaling::fit(&y, config.normalize_output);
    let y_std = scaling.apply(&y);
    let refs: Vec<&[f64]> = obs.iter().map(|o| o.point.as_slice()).collect();
    let widths = config.widths(&refs, d);

    let level_bounds = gp::se_bounds(&y_std, &widths);
    let mut bounds = Vec::new();
    let mut start = Vec::new();
    for s in 0..levels {
        bounds.extend_from_slice(&level_bounds);
        let mut st = gp::se_start(&widths);
        if s > 0 {
            st[0] = math::ln(0.1);
        }
        start.extend(st);
    }
    for _ in 1..levels {
        bounds.push((-5.0, 5.0));
        start.push(1.0);
    }

    let cov = MfCovariance { inputs: obs, levels, dim: d };
    let reg = Regularization {
        noise: config.noise_variance / (scaling.scale * scaling.scale),
        jitter: config.jitter,
    };
    let outcome = hyperopt::fit(&cov, &y_std, reg, &bounds, &start, config.mle_restarts, config.seed)?;
    let kernel = MfKernel::from_params(&outcome.params, levels, d);
    let mut model = MfGpModel::with_kernel(data, kernel, config)?;
    let shift = y.len() as f64 * math::ln(scaling.scale);
    model.initial_log_likelihoods = outcome.initial_log_likelihoods.iter().map(|v| v - shift).collect();
    Ok(model)
}

impl MfGpModel {
    /// Conditions the prior given by `kernel` (standardized output units) on
    /// the data without fitting.
    pub fn with_kernel(data: &MfDataset, kernel: MfKernel, config: &GpConfig) -> Result<Self> {
        let d = validate_dataset(data, config)?;
        if kernel.n_levels() != data.levels() {
            return Err(Error::DimensionMismatch { expected: data.levels(), found: kernel.n_levels() });
        }
        if kernel.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: kernel.dim() });
        }
        let y: Vec<f64> = data.observations().iter().map(|o| o.value).collect();
        let scaling = OutputScaling::fit(&y, config.normalize_output);
        let cov = MfCovariance { inputs: data.observations(), levels: data.levels(), dim: d };
        let k = cov.matrix(&kernel.to_params(), None);
        let system = FittedSystem::build(k, &y, scaling, config.noise_variance, config.jitter)?;
        Ok(MfGpModel {
            data: data.clone(),
            kernel,
            config: config.clone(),
            system,
            initial_log_likelihoods: Vec::new(),
        })
    }

    pub fn levels(&self) -> usize {
        self.data.levels()
    }

    pub fn top_level(&self) -> usize {
        self.data.levels() - 1
    }

    pub fn kernel(&self) -> &MfKernel {
        &self.kernel
    }

    pub fn data(&self) -> &MfDataset {
        &self.data
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn scaling(&self) -> OutputScaling {
        self.system.scaling
    }

    pub fn jitter(&self) -> f64 {
        self.system.jitter
    }

    pub fn cholesky_factor(&self) -> &Matrix {
        self.system.chol.lower()
    }

    /// Prior covariance between two point-level pairs in output units.
    pub fn prior_covariance(&self, x: &[f64], m: usize, y: &[f64], l: usize) -> Result<f64> {
        let s = self.system.scaling.scale;
        Ok(s * s * self.kernel.eval(x, m, y, l)?)
    }

    fn cross_vector(&self, x: &[f64], level: usize) -> Vec<f64> {
        self.data
            .observations()
            .iter()
            .map(|o| self.kernel.eval_unchecked(x, level, &o.point, o.level))
            .collect()
    }

    /// Posterior at `x` for fidelity `level`, plus the top-level posterior and
    /// the cross-covariance between the two.
    pub fn predict_mf(&self, x: &[f64], level: usize) -> Result<MfPosteriorPrediction> {
        self.kernel.check_level(level)?;
        self.kernel.levels[0].check(x)?;
        let top = self.top_level();
        let s2 = self.system.scaling.scale * self.system.scaling.scale;
        let k_m = self.cross_vector(x, level);
        let prior_m = self.kernel.eval_unchecked(x, level, x, level);
        let (mean_m, var_m, v_m) = self.system.posterior(&k_m, prior_m);
        let (mean, variance) = self.system.to_output(mean_m, var_m);
        let (top_mean, top_variance, cross) = if level == top {
            (mean, variance, s2 * var_m)
        } else {
            let k_t = self.cross_vector(x, top);
            let prior_t = self.kernel.eval_unchecked(x, top, x, top);
            let (mean_t, var_t, v_t) = self.system.posterior(&k_t, prior_t);
            let (tm, tv) = self.system.to_output(mean_t, var_t);
            let prior_cross = self.kernel.eval_unchecked(x, level, x, top);
            (tm, tv, s2 * (prior_cross - dot(&v_m, &v_t)))
        };
        Ok(MfPosteriorPrediction {
            level,
            mean,
            variance,
            top_mean,
            top_variance,
            cross_covariance: cross,
            variance_floor: 2.0 * self.system.jitter * s2,
        })
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.system.log_likelihood()
    }

    pub fn restart_initial_log_likelihoods(&self) -> &[f64] {
        &self.initial_log_likelihoods
    }
}

/// Largest `|cov(f_m(x), f_{m-1}(x') | f_{m-1}(x))|` over all transitions of
/// the prior. The autoregressive structure makes this zero for `x ≠ x'`.
pub fn markov_property_check(kernel: &MfKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    if kernel.n_levels() < 2 {
        return Err(Error::Precondition("the Markov property needs at least two levels"));
    }
    if x == y {
        return Err(Error::Precondition("the Markov property is stated for distinct points"));
    }
    let mut worst = 0.0_f64;
    for m in 1..kernel.n_levels() {
        let joint = kernel.eval(x, m, y, m - 1)?;
        let through = kernel.eval(x, m, x, m - 1)?;
        let lower = kernel.eval(x, m - 1, y, m - 1)?;
        let lower_var = kernel.eval(x, m - 1, x, m - 1)?;
        worst = worst.max((joint - through * lower / lower_var).abs());
    }
    Ok(worst)
}
