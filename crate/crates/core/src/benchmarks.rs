//! Analytical multifidelity test problems.
//!
//! Each problem has a cheap low-fidelity model and the ground truth. In
//! single-fidelity mode only the ground truth is exposed (one level of cost 1).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::engine::Objective;
use crate::{math, Error, Result};

/// Low fidelity.
pub const LOW: usize = 0;
/// Ground truth.
pub const HIGH: usize = 1;

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) { Ok(()) } else { Err(Error::OutOfDomain) }
}

fn check_level(level: usize) -> Result<()> {
    if level <= HIGH { Ok(()) } else { Err(Error::InvalidFidelity { level, levels: 2 }) }
}

/// `(6x - 2)² sin(12x - 4)`; the low fidelity is `0.5 y_hi(x) + 10 (x - 0.5)`.
pub fn forrester(x: f64, level: usize) -> Result<f64> {
    check_unit(x)?;
    check_level(level)?;
    let t = 6.0 * x - 2.0;
    let hi = t * t * math::sin(12.0 * x - 4.0);
    Ok(if level == HIGH { hi } else { 0.5 * hi + 10.0 * (x - 0.5) })
}

/// `(x - √2) sin²(8πx)`; the low fidelity is `sin(8πx)`.
pub fn sin_squared(x: f64, level: usize) -> Result<f64> {
    check_unit(x)?;
    check_level(level)?;
    let lo = math::sin(8.0 * PI * x);
    Ok(if level == HIGH { (x - SQRT_2) * lo * lo } else { lo })
}

/// `Σ (1 - x_i)² + 100 (x_{i+1} - x_i)²` over `i < d - 1`, or the classical
/// `100 (x_{i+1} - x_i²)²` coupling when `classic` is set. The low fidelity
/// is `(y_hi - 4 - Σ 0.5 x_i) / (3 + Σ 0.25 x_i)`.
pub fn rosenbrock_variant(x: &[f64], level: usize, classic: bool) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter("rosenbrock needs at least two dimensions"));
    }
    if x.iter().any(|v| !(-2.0..=2.0).contains(v)) {
        return Err(Error::OutOfDomain);
    }
    check_level(level)?;
    let hi: f64 = x
        .windows(2)
        .map(|w| {
            let coupling = if classic { w[1] - w[0] * w[0] } else { w[1] - w[0] };
            (1.0 - w[0]) * (1.0 - w[0]) + 100.0 * coupling * coupling
        })
        .sum();
    if level == HIGH {
        return Ok(hi);
    }
    let s: f64 = x.iter().sum();
    Ok((hi - 4.0 - 0.5 * s) / (3.0 + 0.25 * s))
}

/// Cost per level: 1 for the top level, `1 / (5 (M - 1 - l))` below it.
pub fn fidelity_costs(levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|l| if l + 1 == levels { 1.0 } else { 1.0 / (5.0 * (levels - 1 - l) as f64) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Forrester,
    SinSquared,
    Rosenbrock { classic: bool },
}

impl BenchmarkKind {
    /// `forrester`, `sin2` or `rosenbrock`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "forrester" => Some(BenchmarkKind::Forrester),
            "sin2" => Some(BenchmarkKind::SinSquared),
            "rosenbrock" => Some(BenchmarkKind::Rosenbrock { classic: false }),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkKind::Forrester => "forrester",
            BenchmarkKind::SinSquared => "sin2",
            BenchmarkKind::Rosenbrock { .. } => "rosenbrock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityMode {
    Single,
    Multi,
}

impl FidelityMode {
    pub fn levels(&self) -> usize {
        match self {
            FidelityMode::Single => 1,
            FidelityMode::Multi => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProblem {
    kind: BenchmarkKind,
    mode: FidelityMode,
    bounds: Vec<(f64, f64)>,
    costs: Vec<f64>,
    optimum_point: Vec<f64>,
    optimum_value: f64,
}

impl BenchmarkProblem {
    /// `dim` must be 1 for the one-dimensional problems and at least 2 for
    /// Rosenbrock.
    pub fn new(kind: BenchmarkKind, mode: FidelityMode, dim: usize) -> Result<Self> {
        let (bounds, optimum_point, optimum_value) = match kind {
            BenchmarkKind::Forrester | BenchmarkKind::SinSquared if dim != 1 => {
                return Err(Error::DimensionMismatch { expected: 1, found: dim })
            }
            BenchmarkKind::Forrester => (vec![(0.0, 1.0)], vec![0.757_249], -6.020_74),
            BenchmarkKind::SinSquared => (vec![(0.0, 1.0)], vec![0.061_914_7], -1.352_01),
            BenchmarkKind::Rosenbrock { .. } if dim < 2 => {
                return Err(Error::InvalidParameter("rosenbrock needs at least two dimensions"))
            }
            BenchmarkKind::Rosenbrock { .. } => (vec![(-2.0, 2.0); dim], vec![1.0; dim], 0.0),
        };
        Ok(BenchmarkProblem { kind, mode, bounds, costs: fidelity_costs(mode.levels()), optimum_point, optimum_value })
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }

    pub fn mode(&self) -> FidelityMode {
        self.mode
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn optimum_point(&self) -> &[f64] {
        &self.optimum_point
    }

    /// Underlying two-level function, independent of the mode.
    pub fn evaluate_raw(&self, x: &[f64], level: usize) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        match self.kind {
            BenchmarkKind::Forrester => forrester(x[0], level),
            BenchmarkKind::SinSquared => sin_squared(x[0], level),
            BenchmarkKind::Rosenbrock { classic } => rosenbrock_variant(x, level, classic),
        }
    }
}

impl Objective for BenchmarkProblem {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn costs(&self) -> &[f64] {
        &self.costs
    }

    fn evaluate(&self, x: &[f64], level: usize) -> Result<f64> {
        let levels = self.mode.levels();
        if level >= levels {
            return Err(Error::InvalidFidelity { level, levels });
        }
        let raw = if self.mode == FidelityMode::Single { HIGH } else { level };
        self.evaluate_raw(x, raw)
    }

    fn optimum_value(&self) -> Option<f64> {
        Some(self.optimum_value)
    }
}
