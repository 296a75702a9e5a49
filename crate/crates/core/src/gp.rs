//! Single-fidelity Gaussian-process regression with a zero-mean prior.
//!
//! Outputs are standardized internally (zero mean, unit variance) and the
//! transformation is undone on prediction. The kernel system
//! `K + σ_ε I + jitter·I` is factored once at fit time; predictions reuse the
//! cached factor.

use alloc::vec::Vec;

use crate::hyperopt::{self, Covariance, Regularization};
use crate::kernel::Kernel;
use crate::linalg::{dot, factor_with_jitter, Cholesky, Matrix};
use crate::{math, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    /// Observation noise variance `σ_ε` in output units.
    pub noise_variance: f64,
    /// Initial diagonal jitter; doubled on factorization failure.
    pub jitter: f64,
    pub mle_restarts: usize,
    /// Seed for the random restarts of the likelihood maximization.
    pub seed: u64,
    pub normalize_output: bool,
    /// Per-dimension domain width used for the lengthscale upper bound
    /// (`10 × width`). Falls back to the span of the training inputs.
    pub domain_width: Option<Vec<f64>>,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            noise_variance: 0.0,
            jitter: 1e-8,
            mle_restarts: 5,
            seed: 0,
            normalize_output: true,
            domain_width: None,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance >= 0.0) {
            return Err(Error::InvalidParameter("noise variance must be nonnegative"));
        }
        if !(self.jitter > 0.0) {
            return Err(Error::InvalidParameter("jitter must be positive"));
        }
        if self.mle_restarts == 0 {
            return Err(Error::InvalidParameter("at least one likelihood restart is required"));
        }
        Ok(())
    }

    pub(crate) fn widths(&self, inputs: &[&[f64]], dim: usize) -> Vec<f64> {
        if let Some(w) = &self.domain_width {
            if w.len() == dim {
                return w.clone();
            }
        }
        (0..dim)
            .map(|j| {
                let (lo, hi) = inputs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])));
                let span = hi - lo;
                if span > 0.0 && span.is_finite() { span } else { 1.0 }
            })
            .collect()
    }
}

/// Posterior mean `μ(x)` and variance `σ²(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorPrediction {
    pub fn std_dev(&self) -> f64 {
        math::sqrt(self.variance.max(0.0))
    }
}

/// Affine output standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputScaling {
    pub mean: f64,
    pub scale: f64,
}

impl OutputScaling {
    pub(crate) fn fit(y: &[f64], enabled: bool) -> Self {
        if !enabled || y.is_empty() {
            return OutputScaling { mean: 0.0, scale: 1.0 };
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = math::sqrt(var);
        let scale = if scale > 1e-12 * mean.abs().max(1.0) { scale } else { 1.0 };
        OutputScaling { mean, scale }
    }

    pub(crate) fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.scale).collect()
    }
}

/// Cached factorization of a fitted kernel system in standardized units.
#[derive(Debug, Clone)]
pub(crate) struct FittedSystem {
    pub chol: Cholesky,
    pub alpha: Vec<f64>,
    pub scaling: OutputScaling,
    pub noise: f64,
    pub jitter: f64,
    pub y_std: Vec<f64>,
}

impl FittedSystem {
    pub fn build(mut k: Matrix, y: &[f64], scaling: OutputScaling, noise_variance: f64, jitter: f64) -> Result<Self> {
        let noise = noise_variance / (scaling.scale * scaling.scale);
        let reg = Regularization { noise, jitter };
        let max_jitter = reg.max_jitter(hyperopt::max_diagonal(&k));
        k.add_diagonal(noise);
        let (chol, used) = factor_with_jitter(&k, jitter, max_jitter)?;
        let y_std = scaling.apply(y);
        let alpha = chol.solve(&y_std);
        Ok(FittedSystem { chol, alpha, scaling, noise, jitter: used, y_std })
    }

    /// Standardized mean and variance given the cross-covariance vector and
    /// the prior variance at the query point.
    pub fn posterior(&self, kx: &[f64], prior: f64) -> (f64, f64, Vec<f64>) {
        let mean = dot(kx, &self.alpha);
        let v = self.chol.solve_lower(kx);
        let var = prior - dot(&v, &v);
        (mean, var, v)
    }

    pub fn log_likelihood(&self) -> f64 {
        let n = self.y_std.len() as f64;
        let standardized =
            -0.5 * dot(&self.y_std, &self.alpha) - 0.5 * self.chol.log_det() - 0.5 * n * LN_2PI;
        standardized - n * math::ln(self.scaling.scale)
    }

    pub fn to_output(&self, mean: f64, var: f64) -> (f64, f64) {
        let s = self.scaling.scale;
        (self.scaling.mean + s * mean, (s * s * var).max(0.0))
    }
}

/// SE covariance over a fixed training set, parameterized in log space.
pub(crate) struct SeCovariance<'a> {
    pub inputs: &'a [Vec<f64>],
}

impl Covariance for SeCovariance<'_> {
    fn n_params(&self) -> usize {
        1 + self.inputs.first().map_or(0, |x| x.len())
    }

    fn matrix(&self, p: &[f64], grads: Option<&mut Vec<Matrix>>) -> Matrix {
        let kernel = Kernel::from_log_params(p);
        let n = self.inputs.len();
        let mut k = Matrix::zeros(n, n);
        let d = kernel.dim();
        let mut grads = grads;
        if let Some(g) = grads.as_deref_mut() {
            *g = hyperopt::zero_grads(1 + d, n);
        }
        for i in 0..n {
            for j in 0..=i {
                let (xi, xj) = (&self.inputs[i], &self.inputs[j]);
                let v = kernel.eval_unchecked(xi, xj);
                k[(i, j)] = v;
                k[(j, i)] = v;
                if let Some(g) = grads.as_deref_mut() {
                    g[0][(i, j)] = v;
                    g[0][(j, i)] = v;
                    for a in 0..d {
                        let r = (xi[a] - xj[a]) / kernel.lengthscales()[a];
                        let dv = v * r * r;
                        g[1 + a][(i, j)] = dv;
                        g[1 + a][(j, i)] = dv;
                    }
                }
            }
        }
        k
    }
}

/// Bounds in log space: variance in `[1e-6, 10·var(y)]`, lengthscales in
/// `[1e-3, 10·width]`.
pub(crate) fn se_bounds(y_std: &[f64], widths: &[f64]) -> Vec<(f64, f64)> {
    let n = y_std.len().max(1) as f64;
    let mean = y_std.iter().sum::<f64>() / n;
    let var = y_std.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let var = if var > 1e-12 { var } else { 1.0 };
    let mut b = Vec::with_capacity(1 + widths.len());
    b.push(hyperopt::log_bounds(1e-6, 10.0 * var));
    b.extend(widths.iter().map(|w| hyperopt::log_bounds(1e-3, 10.0 * w)));
    b
}

pub(crate) fn se_start(widths: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(1 + widths.len());
    p.push(0.0);
    p.extend(widths.iter().map(|w| math::ln(0.25 * w)));
    p
}

pub(crate) fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Empty("input dimension"));
    }
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("training data must be finite"));
    }
    Ok(d)
}

/// Fitted single-fidelity GP.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    kernel: Kernel,
    config: GpConfig,
    system: FittedSystem,
    initial_log_likelihoods: Vec<f64>,
}

/// Fits kernel hyperparameters by maximum likelihood and caches the factor.
pub fn fit_gp(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel> {
    config.validate()?;
    let d = check_inputs(x, y)?;
    let scaling = OutputScaling::fit(y, config.normalize_output);
    let y_std = scaling.apply(y);
    let refs: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
    let widths = config.widths(&refs, d);
    let bounds = se_bounds(&y_std, &widths);
    let cov = SeCovariance { inputs: x };
    let reg = Regularization {
        noise: config.noise_variance / (scaling.scale * scaling.scale),
        jitter: config.jitter,
    };
    let outcome = hyperopt::fit(
        &cov,
        &y_std,
        reg,
        &bounds,
        &se_start(&widths),
        config.mle_restarts,
        config.seed,
    )?;
    let kernel = Kernel::from_log_params(&outcome.params);
    let mut model = GpModel::with_kernel(x, y, kernel, config)?;
    let shift = x.len() as f64 * math::ln(scaling.scale);
    model.initial_log_likelihoods = outcome.initial_log_likelihoods.iter().map(|v| v - shift).collect();
    Ok(model)
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters (kernel in standardized
    /// output units) on the data, without any likelihood maximization.
    pub fn with_kernel(x: &[Vec<f64>], y: &[f64], kernel: Kernel, config: &GpConfig) -> Result<Self> {
        config.validate()?;
        let d = check_inputs(x, y)?;
        if kernel.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: kernel.dim() });
        }
        let scaling = OutputScaling::fit(y, config.normalize_output);
        let cov = SeCovariance { inputs: x };
        let k = cov.matrix(&kernel.log_params(), None);
        let system = FittedSystem::build(k, y, scaling, config.noise_variance, config.jitter)?;
        Ok(GpModel {
            inputs: x.to_vec(),
            outputs: y.to_vec(),
            kernel,
            config: config.clone(),
            system,
            initial_log_likelihoods: Vec::new(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<PosteriorPrediction> {
        self.kernel.check(x)?;
        let kx: Vec<f64> = self.inputs.iter().map(|xi| self.kernel.eval_unchecked(x, xi)).collect();
        let (mean, var, _) = self.system.posterior(&kx, self.kernel.variance());
        let (mean, variance) = self.system.to_output(mean, var);
        Ok(PosteriorPrediction { mean, variance })
    }

    /// Exact Gaussian log marginal likelihood of the training outputs,
    /// evaluated through the cached factor.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.system.log_likelihood()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn scaling(&self) -> OutputScaling {
        self.system.scaling
    }

    /// Jitter actually added to the diagonal (after any escalation).
    pub fn jitter(&self) -> f64 {
        self.system.jitter
    }

    pub fn cholesky_factor(&self) -> &Matrix {
        self.system.chol.lower()
    }

    /// `K + σ_ε I + jitter·I` in standardized units: the matrix the cached
    /// factor decomposes.
    pub fn system_matrix(&self) -> Matrix {
        let cov = SeCovariance { inputs: &self.inputs };
        let mut k = cov.matrix(&self.kernel.log_params(), None);
        k.add_diagonal(self.system.noise + self.system.jitter);
        k
    }

    /// Prior variance `k(x, x)` in output units.
    pub fn prior_variance(&self) -> f64 {
        let s = self.system.scaling.scale;
        s * s * self.kernel.variance()
    }

    /// Likelihood at the starting point of every restart of the last fit.
    pub fn restart_initial_log_likelihoods(&self) -> &[f64] {
        &self.initial_log_likelihoods
    }
}
