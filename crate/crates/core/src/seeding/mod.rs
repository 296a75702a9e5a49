//! Batch seeding: choose points, fidelities and workers for one iteration.
//!
//! The program selects binary assignments `p[i][m][g]` (candidate `i`
//! evaluated at fidelity `m` on worker `g`) that first maximize the consumed
//! cost and then the acquisition mass, subject to
//!
//! * at most one chosen candidate per bin,
//! * per-worker cost `≤ β_g`,
//! * each `(i, m)` on at most one worker,
//! * fidelity nesting: `(i, m)` chosen implies `(i, l)` chosen for `l < m`.
//!
//! The weighted scalar objective `Υ (Σβ - cost) - value` is minimized; with
//! the `Υ` chosen by [`build_instance`] this is the same as the
//! lexicographic order used by the solver in [`solve`].

mod solver;
mod text;

use alloc::vec::Vec;
use core::fmt;

use crate::acquisition::AcqTable;
use crate::gridding::BinEncoding;
use crate::{Error, Result};

pub use solver::{solve, solve_with_limit, NodeLimitExceeded, DEFAULT_NODE_LIMIT};

/// Absolute tolerance on capacity and cost comparisons.
pub const COST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedingInstance {
    encodings: Vec<BinEncoding>,
    values: Vec<f64>,
    costs: Vec<f64>,
    capacities: Vec<f64>,
    upsilon: f64,
    total_bins: usize,
}

impl SeedingInstance {
    /// `values` is row-major `N × M` (`values[i * M + m] = a_i⁽ᵐ⁾`).
    pub fn new(
        encodings: Vec<BinEncoding>,
        values: Vec<f64>,
        costs: Vec<f64>,
        capacities: Vec<f64>,
        upsilon: f64,
    ) -> Result<Self> {
        let total_bins = check_encodings(&encodings)?;
        check_resources(&costs, &capacities)?;
        let expected = encodings.len() * costs.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("acquisition values must be finite and nonnegative"));
        }
        let mass: f64 = values.iter().sum();
        if !(upsilon > mass) || !upsilon.is_finite() {
            return Err(Error::InvalidParameter("upsilon must exceed the total acquisition mass"));
        }
        Ok(SeedingInstance { encodings, values, costs, capacities, upsilon, total_bins })
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.costs.len()
    }

    pub fn workers(&self) -> usize {
        self.capacities.len()
    }

    pub fn total_bins(&self) -> usize {
        self.total_bins
    }

    pub fn encodings(&self) -> &[BinEncoding] {
        &self.encodings
    }

    pub fn value(&self, candidate: usize, level: usize) -> f64 {
        self.values[candidate * self.levels() + level]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.iter().sum()
    }
}

fn check_encodings(encodings: &[BinEncoding]) -> Result<usize> {
    let first = encodings.first().ok_or(Error::Empty("candidate pool"))?;
    let total = first.total_bins();
    let dims = first.active().len();
    for enc in encodings {
        if enc.total_bins() != total {
            return Err(Error::DimensionMismatch { expected: total, found: enc.total_bins() });
        }
        if enc.active().len() != dims {
            return Err(Error::DimensionMismatch { expected: dims, found: enc.active().len() });
        }
    }
    Ok(total)
}

fn check_resources(costs: &[f64], capacities: &[f64]) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::Empty("fidelity costs"));
    }
    if capacities.is_empty() {
        return Err(Error::Empty("worker capacities"));
    }
    if costs.iter().chain(capacities).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("costs and capacities must be positive"));
    }
    Ok(())
}

/// `Υ = (1 + Σ a) · max(1, Σ β) / min λ`.
pub fn default_upsilon(values: &[f64], costs: &[f64], capacities: &[f64]) -> f64 {
    let mass: f64 = values.iter().sum();
    let beta: f64 = capacities.iter().sum();
    let lambda_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 + mass) * beta.max(1.0) / lambda_min
}

/// Assembles an instance with the automatic `Υ`.
pub fn build_instance(
    encodings: &[BinEncoding],
    table: &AcqTable,
    costs: &[f64],
    capacities: &[f64],
) -> Result<SeedingInstance> {
    if encodings.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if table.len() != encodings.len() {
        return Err(Error::DimensionMismatch { expected: encodings.len(), found: table.len() });
    }
    if table.levels() != costs.len() {
        return Err(Error::DimensionMismatch { expected: costs.len(), found: table.levels() });
    }
    let values: Vec<f64> = (0..table.len()).flat_map(|i| table.row(i).iter().copied()).collect();
    check_resources(costs, capacities)?;
    let upsilon = default_upsilon(&values, costs, capacities);
    SeedingInstance::new(encodings.to_vec(), values, costs.to_vec(), capacities.to_vec(), upsilon)
}

/// One `p` variable set to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selection {
    pub candidate: usize,
    pub level: usize,
    pub worker: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverStats {
    pub nodes: u64,
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedingPlan {
    selections: Vec<Selection>,
    chosen_points: Vec<usize>,
    objective: f64,
    stats: SolverStats,
}

impl SeedingPlan {
    /// Sorts the selections and derives the chosen points and the objective.
    pub fn new(instance: &SeedingInstance, mut selections: Vec<Selection>, stats: SolverStats) -> Self {
        selections.sort_unstable();
        let mut chosen_points: Vec<usize> = selections.iter().map(|s| s.candidate).collect();
        chosen_points.dedup();
        let objective = objective(instance, &selections);
        SeedingPlan { selections, chosen_points, objective, stats }
    }

    pub fn empty(instance: &SeedingInstance) -> Self {
        SeedingPlan::new(instance, Vec::new(), SolverStats { nodes: 0, proven_optimal: false })
    }

    /// Sorted by `(candidate, level, worker)`.
    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    /// Distinct candidates with at least one selection (the `q` variables).
    pub fn chosen_points(&self) -> &[usize] {
        &self.chosen_points
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }
}

/// `Σ_m λ⁽ᵐ⁾ · #{selections at m}`. Summing per level keeps equal
/// multisets of fidelities at bit-identical cost.
pub fn plan_cost(instance: &SeedingInstance, selections: &[Selection]) -> f64 {
    let mut counts = alloc::vec![0usize; instance.levels()];
    for s in selections {
        if s.level < counts.len() {
            counts[s.level] += 1;
        }
    }
    counts.iter().zip(instance.costs()).map(|(c, l)| *c as f64 * l).sum()
}

/// `Σ a_i⁽ᵐ⁾` over the selections in `(candidate, level)` order.
pub fn plan_value(instance: &SeedingInstance, selections: &[Selection]) -> f64 {
    let mut pairs: Vec<(usize, usize)> = selections
        .iter()
        .filter(|s| s.candidate < instance.len() && s.level < instance.levels())
        .map(|s| (s.candidate, s.level))
        .collect();
    pairs.sort_unstable();
    pairs.iter().map(|(i, m)| instance.value(*i, *m)).sum()
}

/// `Υ (Σβ_g - cost) - value`.
pub fn objective(instance: &SeedingInstance, selections: &[Selection]) -> f64 {
    instance.upsilon() * (instance.total_capacity() - plan_cost(instance, selections))
        - plan_value(instance, selections)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A selection refers to a candidate, level or worker that does not exist.
    IndexOutOfRange(Selection),
    /// More than one chosen candidate falls in the bin.
    BinConflict { bin: usize },
    /// Worker load exceeds its capacity.
    CapacityExceeded { worker: usize, load: f64 },
    /// `chosen_points` disagrees with the selections.
    Coherence { candidate: usize },
    /// The same `(candidate, level)` is assigned to several workers.
    DuplicateAssignment { candidate: usize, level: usize },
    /// A level is selected without every lower level.
    FidelityNesting { candidate: usize, level: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange(s) => {
                write!(f, "selection ({}, {}, {}) is out of range", s.candidate, s.level, s.worker)
            }
            Violation::BinConflict { bin } => write!(f, "bin {bin} holds more than one chosen point"),
            Violation::CapacityExceeded { worker, load } => write!(f, "worker {worker} overloaded ({load})"),
            Violation::Coherence { candidate } => {
                write!(f, "candidate {candidate} chosen flag disagrees with its selections")
            }
            Violation::DuplicateAssignment { candidate, level } => {
                write!(f, "candidate {candidate} runs level {level} on several workers")
            }
            Violation::FidelityNesting { candidate, level } => {
                write!(f, "candidate {candidate} selects level {level} without all lower levels")
            }
        }
    }
}

/// Checks a plan against every constraint, independently of the solver.
pub fn verify_plan(instance: &SeedingInstance, plan: &SeedingPlan) -> Vec<Violation> {
    verify_selections(instance, plan.selections(), Some(plan.chosen_points()))
}

/// Same as [`verify_plan`] for a raw selection list; `chosen` is compared
/// against the candidates implied by `selections` when given.
pub fn verify_selections(
    instance: &SeedingInstance,
    selections: &[Selection],
    chosen: Option<&[usize]>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let (n, levels, workers) = (instance.len(), instance.levels(), instance.workers());
    let mut taken = alloc::vec![0usize; n * levels];
    let mut load_counts = alloc::vec![0usize; workers * levels];
    for s in selections {
        if s.candidate >= n || s.level >= levels || s.worker >= workers {
            out.push(Violation::IndexOutOfRange(*s));
            continue;
        }
        taken[s.candidate * levels + s.level] += 1;
        load_counts[s.worker * levels + s.level] += 1;
    }

    for g in 0..workers {
        let load: f64 = (0..levels).map(|m| load_counts[g * levels + m] as f64 * instance.costs()[m]).sum();
        if load > instance.capacities()[g] + COST_TOLERANCE {
            out.push(Violation::CapacityExceeded { worker: g, load });
        }
    }

    let mut implied = Vec::new();
    for i in 0..n {
        let row = &taken[i * levels..(i + 1) * levels];
        for (m, count) in row.iter().enumerate() {
            if *count > 1 {
                out.push(Violation::DuplicateAssignment { candidate: i, level: m });
            }
            if *count > 0 && row[..m].iter().any(|c| *c == 0) {
                out.push(Violation::FidelityNesting { candidate: i, level: m });
            }
        }
        if row.iter().any(|c| *c > 0) {
            implied.push(i);
        }
    }

    if let Some(chosen) = chosen {
        let mut given = chosen.to_vec();
        given.sort_unstable();
        given.dedup();
        for i in given.iter().filter(|i| implied.binary_search(i).is_err()) {
            out.push(Violation::Coherence { candidate: *i });
        }
        for i in implied.iter().filter(|i| given.binary_search(i).is_err()) {
            out.push(Violation::Coherence { candidate: *i });
        }
    }

    let mut bin_use = alloc::vec![0usize; instance.total_bins()];
    for i in &implied {
        for e in instance.encodings()[*i].active() {
            bin_use[*e] += 1;
        }
    }
    for (bin, count) in bin_use.iter().enumerate() {
        if *count > 1 {
            out.push(Violation::BinConflict { bin });
        }
    }
    out
}

pub use text::{parse_instance, parse_plan, write_instance, write_plan};
