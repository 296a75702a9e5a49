//! Expected improvement and its multifidelity extension.
//!
//! The optimization problem is a minimization, so improvement is measured as
//! `best - μ(x) - ζ` unless [`AcqConfig::maximize`] is set.

use alloc::vec::Vec;

use crate::gp::PosteriorPrediction;
use crate::mfgp::{MfGpModel, MfPosteriorPrediction};
use crate::stats::{normal_cdf, normal_pdf};
use crate::{math, Error, Result};

/// Standard deviations at or below this are treated as exactly zero.
const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqConfig {
    /// Exploration margin `ζ ≥ 0`.
    pub zeta: f64,
    pub maximize: bool,
}

impl Default for AcqConfig {
    fn default() -> Self {
        AcqConfig { zeta: 0.0, maximize: false }
    }
}

impl AcqConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0) {
            return Err(Error::InvalidParameter("zeta must be nonnegative"));
        }
        Ok(())
    }
}

/// Best highest-fidelity observation so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub best_value: f64,
    pub best_point: Vec<f64>,
}

pub fn expected_improvement(pred: &PosteriorPrediction, inc: &Incumbent, cfg: &AcqConfig) -> f64 {
    let sigma = pred.std_dev();
    if sigma <= DEGENERATE_STD {
        return 0.0;
    }
    let improvement = if cfg.maximize {
        pred.mean - inc.best_value - cfg.zeta
    } else {
        inc.best_value - pred.mean - cfg.zeta
    };
    let z = improvement / sigma;
    let ei = improvement * normal_cdf(z) + sigma * normal_pdf(z);
    if ei.is_finite() { ei.max(0.0) } else { 0.0 }
}

/// Correlation between level `m` and the top level at the same point,
/// clamped to `[0, 1]`.
pub fn fidelity_correlation(pred: &MfPosteriorPrediction, top_level: usize) -> f64 {
    if pred.level == top_level {
        return 1.0;
    }
    if pred.variance <= pred.variance_floor || pred.top_variance <= pred.variance_floor {
        return 0.0;
    }
    let corr = pred.cross_covariance / math::sqrt(pred.variance * pred.top_variance);
    if corr.is_finite() { corr.clamp(0.0, 1.0) } else { 0.0 }
}

/// Noise discount `1 - σ_ε / sqrt(σ²_m(x) + σ_ε²)` for a noise standard
/// deviation `σ_ε`; exactly 1 when noiseless.
pub fn noise_discount(pred: &MfPosteriorPrediction, noise_std: f64) -> f64 {
    if noise_std == 0.0 {
        return 1.0;
    }
    1.0 - noise_std / math::sqrt(pred.variance + noise_std * noise_std)
}

/// Expected improvement at the top level discounted by the cross-fidelity
/// correlation and the noise factor of the requested level. Zero where the
/// top-level variance is below the variance floor.
pub fn mf_expected_improvement(
    pred: &MfPosteriorPrediction,
    top_level: usize,
    inc: &Incumbent,
    noise_std: f64,
    cfg: &AcqConfig,
) -> f64 {
    if pred.top_variance <= pred.variance_floor {
        return 0.0;
    }
    let top = PosteriorPrediction { mean: pred.top_mean, variance: pred.top_variance };
    let ei = expected_improvement(&top, inc, cfg);
    if ei == 0.0 {
        return 0.0;
    }
    ei * fidelity_correlation(pred, top_level) * noise_discount(pred, noise_std)
}

/// `N × M` table of acquisition values aligned with a candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct AcqTable {
    levels: usize,
    values: Vec<f64>,
}

impl AcqTable {
    pub fn new(levels: usize, values: Vec<f64>) -> Result<Self> {
        if levels == 0 || values.len() % levels != 0 {
            return Err(Error::DimensionMismatch { expected: levels, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("acquisition values must be finite and nonnegative"));
        }
        Ok(AcqTable { levels, values })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.levels..(i + 1) * self.levels]
    }

    pub fn get(&self, i: usize, level: usize) -> f64 {
        self.values[i * self.levels + level]
    }

    /// Largest value of a row over all fidelities.
    pub fn row_max(&self, i: usize) -> f64 {
        self.row(i).iter().copied().fold(0.0, f64::max)
    }

    pub fn select_rows(&self, rows: &[usize]) -> AcqTable {
        let values = rows.iter().flat_map(|r| self.row(*r).iter().copied()).collect();
        AcqTable { levels: self.levels, values }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// MFEI for every candidate and fidelity (plain EI when the model has a
/// single level).
pub fn build_acq_table(
    model: &MfGpModel,
    candidates: &[Vec<f64>],
    inc: &Incumbent,
    cfg: &AcqConfig,
) -> Result<AcqTable> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    let levels = model.levels();
    let top = model.top_level();
    let noise_std = math::sqrt(model.config().noise_variance);
    let mut values = Vec::with_capacity(candidates.len() * levels);
    for x in candidates {
        for level in 0..levels {
            let pred = model.predict_mf(x, level)?;
            values.push(mf_expected_improvement(&pred, top, inc, noise_std, cfg));
        }
    }
    AcqTable::new(levels, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn inc(best: f64) -> Incumbent {
        Incumbent { best_value: best, best_point: vec![0.0] }
    }

    #[test]
    fn zero_sigma_gives_zero() {
        let p = PosteriorPrediction { mean: -10.0, variance: 0.0 };
        assert_eq!(expected_improvement(&p, &inc(0.0), &AcqConfig::default()), 0.0);
    }

    #[test]
    fn centred_unit_sigma_is_pdf_at_zero() {
        let p = PosteriorPrediction { mean: 1.5, variance: 1.0 };
        let ei = expected_improvement(&p, &inc(1.5), &AcqConfig::default());
        assert!((ei - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn maximization_flips_the_sign() {
        let p = PosteriorPrediction { mean: 2.0, variance: 1e-30 };
        let cfg = AcqConfig { maximize: true, ..AcqConfig::default() };
        assert_eq!(expected_improvement(&p, &inc(1.0), &cfg), 0.0);
        let p = PosteriorPrediction { mean: 2.0, variance: 0.01 };
        assert!((expected_improvement(&p, &inc(1.0), &cfg) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn top_level_correlation_is_one() {
        let pred = MfPosteriorPrediction {
            level: 1,
            mean: 0.0,
            variance: 0.3,
            top_mean: 0.0,
            top_variance: 0.3,
            cross_covariance: 0.3,
            variance_floor: 1e-6,
        };
        assert_eq!(fidelity_correlation(&pred, 1), 1.0);
        assert_eq!(noise_discount(&pred, 0.0), 1.0);
        let ei = expected_improvement(&PosteriorPrediction { mean: 0.0, variance: 0.3 }, &inc(0.1), &AcqConfig::default());
        assert_eq!(mf_expected_improvement(&pred, 1, &inc(0.1), 0.0, &AcqConfig::default()), ei);
    }

    #[test]
    fn negative_correlation_clamps_to_zero() {
        let pred = MfPosteriorPrediction {
            level: 0,
            mean: 0.0,
            variance: 0.5,
            top_mean: 0.0,
            top_variance: 0.5,
            cross_covariance: -0.2,
            variance_floor: 1e-9,
        };
        assert_eq!(fidelity_correlation(&pred, 1), 0.0);
    }

    #[test]
    fn table_rejects_negative_entries() {
        assert!(AcqTable::new(2, vec![0.1, -0.1]).is_err());
        assert!(AcqTable::new(2, vec![0.1]).is_err());
    }
}
