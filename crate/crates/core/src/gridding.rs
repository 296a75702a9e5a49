//! Discretization of candidate points into per-dimension bins.
//!
//! Each dimension `j` is split into `E_j` strata. A point is encoded by the
//! concatenation of one one-hot block per dimension; the seeding program then
//! allows at most one selected point per stratum. Strata are either equal
//! width ([`uniform_encode`]) or placed at coordinate quantiles of the
//! candidates that survive an acquisition-value filter ([`adaptive_encode`]).

use alloc::vec;
use alloc::vec::Vec;

use crate::stats::{quantile, quantile_sorted};
use crate::{math, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GriddingConfig {
    /// `E_j`, the number of strata per dimension.
    pub bins_per_dim: Vec<usize>,
    /// Upper limit `ξ_max ∈ [0, 1)` of the exploitation quantile.
    pub xi_max: f64,
    /// Learning rate `η_ξ ≥ 0` of the quantile schedule.
    pub learning_rate: f64,
    /// Domain `[L_j, U_j]` per dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl GriddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_dim.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch { expected: self.bounds.len(), found: self.bins_per_dim.len() });
        }
        if self.bins_per_dim.is_empty() {
            return Err(Error::Empty("grid dimensions"));
        }
        if self.bins_per_dim.iter().any(|e| *e == 0) {
            return Err(Error::InvalidParameter("every dimension needs at least one bin"));
        }
        if self.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter("lower bound must be below upper bound"));
        }
        if !(0.0..1.0).contains(&self.xi_max) {
            return Err(Error::InvalidParameter("xi_max must lie in [0, 1)"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter("learning rate must be nonnegative"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bins_per_dim.len()
    }

    /// `E = Σ_j E_j`.
    pub fn total_bins(&self) -> usize {
        self.bins_per_dim.iter().sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.bins_per_dim
            .iter()
            .map(|e| {
                let o = acc;
                acc += e;
                o
            })
            .collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().zip(&self.bounds).any(|(v, (lo, hi))| !(*v >= *lo && *v <= *hi)) {
            return Err(Error::OutOfDomain);
        }
        Ok(())
    }
}

/// One-hot bin membership of a point, stored as the active global bin index
/// of every dimension block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinEncoding {
    active: Vec<usize>,
    total: usize,
}

impl BinEncoding {
    /// Builds an encoding from per-dimension global bin indices.
    pub fn from_active(active: Vec<usize>, total: usize) -> Result<Self> {
        if active.iter().any(|e| *e >= total) {
            return Err(Error::InvalidParameter("bin index beyond the grid"));
        }
        Ok(BinEncoding { active, total })
    }

    fn from_local(local: &[usize], offsets: &[usize], total: usize) -> Self {
        BinEncoding { active: local.iter().zip(offsets).map(|(e, o)| e + o).collect(), total }
    }

    /// Global indices of the set entries, one per dimension.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Length `E` of the binary vector.
    pub fn total_bins(&self) -> usize {
        self.total
    }

    /// The binary vector `χ`.
    pub fn chi(&self) -> Vec<u8> {
        let mut chi = vec![0u8; self.total];
        for e in &self.active {
            chi[*e] = 1;
        }
        chi
    }
}

/// `ξ_t = ξ_max (1 - exp(-η_ξ B / (B_max - B)))`.
pub fn xi_schedule(cfg: &GriddingConfig, spent: f64, max_budget: f64) -> Result<f64> {
    if !(spent >= 0.0) {
        return Err(Error::InvalidParameter("spent budget must be nonnegative"));
    }
    if spent >= max_budget {
        return Err(Error::BudgetExhausted);
    }
    Ok(cfg.xi_max * (1.0 - math::exp(-cfg.learning_rate * spent / (max_budget - spent))))
}

/// Equal-width strata; a coordinate on an interior edge goes to the upper
/// stratum and `x = U_j` to the last one.
pub fn uniform_encode(x: &[f64], cfg: &GriddingConfig) -> Result<BinEncoding> {
    cfg.check_point(x)?;
    let local: Vec<usize> = x
        .iter()
        .zip(&cfg.bounds)
        .zip(&cfg.bins_per_dim)
        .map(|((v, (lo, hi)), e)| {
            let idx = math::floor((v - lo) * *e as f64 / (hi - lo));
            (idx.max(0.0) as usize).min(e - 1)
        })
        .collect();
    Ok(BinEncoding::from_local(&local, &cfg.offsets(), cfg.total_bins()))
}

/// Result of adaptive gridding over a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveGrid {
    /// Indices (into the pool) of the points kept for seeding.
    pub retained: Vec<usize>,
    /// Encodings aligned with `retained`.
    pub encodings: Vec<BinEncoding>,
    /// Per-dimension breakpoints `Q_j^0 ≤ … ≤ Q_j^{E_j}`.
    pub breakpoints: Vec<Vec<f64>>,
    /// Whether the degenerate-quantile guard switched to uniform strata.
    pub fell_back: bool,
}

/// Uniform strata for every point of a pool.
pub fn uniform_grid(points: &[Vec<f64>], cfg: &GriddingConfig) -> Result<AdaptiveGrid> {
    cfg.validate()?;
    let encodings = points.iter().map(|x| uniform_encode(x, cfg)).collect::<Result<Vec<_>>>()?;
    let breakpoints = cfg
        .bounds
        .iter()
        .zip(&cfg.bins_per_dim)
        .map(|((lo, hi), e)| (0..=*e).map(|k| if k == *e { *hi } else { lo + (hi - lo) * k as f64 / *e as f64 }).collect())
        .collect();
    Ok(AdaptiveGrid { retained: (0..points.len()).collect(), encodings, breakpoints, fell_back: false })
}

/// Acquisition-weighted strata.
///
/// Points whose score is below the `xi`-quantile of all scores are dropped
/// (ties kept). Interior breakpoints of dimension `j` are the `e / E_j`
/// quantiles of the surviving coordinates, with the domain bounds as outer
/// edges. When fewer than `max_j E_j` points survive, the whole pool is
/// encoded with uniform strata instead.
pub fn adaptive_encode(points: &[Vec<f64>], scores: &[f64], xi: f64, cfg: &GriddingConfig) -> Result<AdaptiveGrid> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if points.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), found: scores.len() });
    }
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::InvalidParameter("xi must lie in [0, 1)"));
    }
    for x in points {
        cfg.check_point(x)?;
    }
    let threshold = quantile(scores, xi).unwrap_or(f64::NEG_INFINITY);
    let retained: Vec<usize> = (0..points.len()).filter(|i| scores[*i] >= threshold).collect();
    let needed = cfg.bins_per_dim.iter().copied().max().unwrap_or(1);
    if retained.len() < needed {
        let mut grid = uniform_grid(points, cfg)?;
        grid.fell_back = true;
        return Ok(grid);
    }

    let mut breakpoints = Vec::with_capacity(cfg.dim());
    for j in 0..cfg.dim() {
        let mut coords: Vec<f64> = retained.iter().map(|i| points[*i][j]).collect();
        coords.sort_by(f64::total_cmp);
        let e = cfg.bins_per_dim[j];
        let (lo, hi) = cfg.bounds[j];
        let mut q = Vec::with_capacity(e + 1);
        q.push(lo);
        for k in 1..e {
            let v = quantile_sorted(&coords, k as f64 / e as f64).unwrap_or(lo);
            let prev = *q.last().unwrap_or(&lo);
            q.push(v.clamp(prev, hi));
        }
        q.push(hi);
        breakpoints.push(q);
    }

    let offsets = cfg.offsets();
    let encodings = retained
        .iter()
        .map(|i| {
            let local: Vec<usize> = points[*i]
                .iter()
                .zip(&breakpoints)
                .map(|(v, q)| {
                    let e = q.len() - 1;
                    let interior = &q[1..e];
                    interior.partition_point(|b| *b <= *v).min(e - 1)
                })
                .collect();
            BinEncoding::from_local(&local, &offsets, cfg.total_bins())
        })
        .collect();
    Ok(AdaptiveGrid { retained, encodings, breakpoints, fell_back: false })
}
