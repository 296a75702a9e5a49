//! The optimization loop.
//!
//! One run draws a candidate pool, evaluates an initial design, and then
//! repeats: fit the surrogate on all data, score the pool, grid it, solve
//! the seeding program, evaluate the batch on the workers, drop the batch
//! from the pool and charge its cost. The loop stops once the iteration cap
//! or the budget is reached, or when no candidate can be scheduled.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{build_acq_table, AcqConfig, Incumbent};
use crate::design::{generate_pool, CandidatePool};
use crate::gp::GpConfig;
use crate::gridding::{adaptive_encode, uniform_grid, xi_schedule, GriddingConfig};
use crate::mfgp::{fit_mf_gp, MfDataset, Observation};
use crate::seeding::{build_instance, plan_cost, solve_with_limit, SeedingPlan, COST_TOLERANCE, DEFAULT_NODE_LIMIT};
use crate::stats::compute_rse;
use crate::{Error, Result};

/// A multifidelity black box. Level `levels() - 1` is the ground truth.
pub trait Objective: Sync {
    fn bounds(&self) -> &[(f64, f64)];

    /// Cost of one evaluation per level.
    fn costs(&self) -> &[f64];

    fn evaluate(&self, x: &[f64], level: usize) -> Result<f64>;

    fn levels(&self) -> usize {
        self.costs().len()
    }

    fn dim(&self) -> usize {
        self.bounds().len()
    }

    /// Known optimal value, when there is one.
    fn optimum_value(&self) -> Option<f64> {
        None
    }

    fn is_feasible(&self, _x: &[f64]) -> bool {
        true
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn bounds(&self) -> &[(f64, f64)] {
        (**self).bounds()
    }
    fn costs(&self) -> &[f64] {
        (**self).costs()
    }
    fn evaluate(&self, x: &[f64], level: usize) -> Result<f64> {
        (**self).evaluate(x, level)
    }
    fn optimum_value(&self) -> Option<f64> {
        (**self).optimum_value()
    }
    fn is_feasible(&self, x: &[f64]) -> bool {
        (**self).is_feasible(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePool {
    capacities: Vec<f64>,
}

impl ResourcePool {
    pub fn new(capacities: Vec<f64>) -> Result<Self> {
        if capacities.is_empty() {
            return Err(Error::Empty("worker capacities"));
        }
        if capacities.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter("worker capacities must be positive"));
        }
        Ok(ResourcePool { capacities })
    }

    /// `workers` identical workers of capacity `capacity`.
    pub fn uniform(workers: usize, capacity: f64) -> Result<Self> {
        ResourcePool::new(vec![capacity; workers])
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn workers(&self) -> usize {
        self.capacities.len()
    }

    pub fn total(&self) -> f64 {
        self.capacities.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetState {
    pub spent: f64,
    pub max_budget: f64,
    pub iteration: usize,
    pub max_iterations: usize,
}

impl BudgetState {
    pub fn is_exhausted(&self) -> bool {
        self.iteration >= self.max_iterations || self.spent >= self.max_budget
    }
}

/// One evaluation to run: a point at a level on a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub point: Vec<f64>,
    pub level: usize,
    pub worker: usize,
}

/// Runs a batch of tasks. Results are returned in task order; tasks on the
/// same worker run one after another.
pub trait Dispatcher {
    fn dispatch<O: Objective + ?Sized>(&mut self, objective: &O, tasks: &[Task]) -> Vec<Result<f64>>;
}

/// Evaluates every task on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialDispatcher;

impl Dispatcher for SequentialDispatcher {
    fn dispatch<O: Objective + ?Sized>(&mut self, objective: &O, tasks: &[Task]) -> Vec<Result<f64>> {
        tasks.iter().map(|t| objective.evaluate(&t.point, t.level)).collect()
    }
}

/// Evaluation failure inside a batch; `completed` holds the tasks that did
/// finish.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchError {
    pub error: Error,
    pub completed: Vec<(Task, f64)>,
}

/// Turns a plan into tasks over `candidates` (indexed like the instance the
/// plan was solved on) and runs them.
pub fn dispatch_batch<O, D>(
    plan: &SeedingPlan,
    candidates: &[Vec<f64>],
    objective: &O,
    resources: &ResourcePool,
    dispatcher: &mut D,
) -> Result<Vec<(Task, f64)>, DispatchError>
where
    O: Objective + ?Sized,
    D: Dispatcher,
{
    let fail = |error| DispatchError { error, completed: Vec::new() };
    let costs = objective.costs();
    let mut loads = vec![0.0; resources.workers()];
    let mut tasks = Vec::with_capacity(plan.selections().len());
    for s in plan.selections() {
        let point = candidates.get(s.candidate).ok_or(fail(Error::Precondition("plan refers to a missing candidate")))?;
        let cost = costs.get(s.level).ok_or(fail(Error::InvalidFidelity { level: s.level, levels: costs.len() }))?;
        let load = loads.get_mut(s.worker).ok_or(fail(Error::Precondition("plan refers to a missing worker")))?;
        *load += cost;
        tasks.push(Task { point: point.clone(), level: s.level, worker: s.worker });
    }
    if loads.iter().zip(resources.capacities()).any(|(l, c)| *l > c + COST_TOLERANCE) {
        return Err(fail(Error::Precondition("plan overloads a worker")));
    }
    let results = dispatcher.dispatch(objective, &tasks);
    if results.len() != tasks.len() {
        return Err(fail(Error::Precondition("dispatcher lost tasks")));
    }
    let mut completed = Vec::with_capacity(tasks.len());
    let mut first_error = None;
    for (task, result) in tasks.into_iter().zip(results) {
        match result {
            Ok(v) => completed.push((task, v)),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(error) => Err(DispatchError { error, completed }),
        None => Ok(completed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaalConfig {
    pub max_budget: f64,
    pub max_iterations: usize,
    /// Initial design size per level; level `m` gets the first `n[m]` points
    /// of a shuffled pool, so higher levels nest inside lower ones when the
    /// sizes decrease.
    pub initial_design: Vec<usize>,
    pub pool_size: usize,
    pub bins_per_dim: Vec<usize>,
    pub xi_max: f64,
    /// `η_ξ`; zero selects equal-width strata.
    pub learning_rate: f64,
    pub acquisition: AcqConfig,
    pub resources: ResourcePool,
    pub gp: GpConfig,
    pub seed: u64,
    pub node_limit: u64,
}

impl RaalConfig {
    /// One unit worker, 5 strata per dimension, `B_max = 20`, a pool of
    /// `100·d` points and an initial design of 2 top-level points (plus 5 per
    /// lower level).
    pub fn defaults<O: Objective + ?Sized>(objective: &O) -> Self {
        let levels = objective.levels();
        let mut initial_design = vec![5; levels];
        initial_design[levels - 1] = 2;
        RaalConfig {
            max_budget: 20.0,
            max_iterations: 100,
            initial_design,
            pool_size: 100 * objective.dim(),
            bins_per_dim: vec![5; objective.dim()],
            xi_max: 0.8,
            learning_rate: 0.0,
            acquisition: AcqConfig::default(),
            resources: ResourcePool { capacities: vec![1.0] },
            gp: GpConfig::default(),
            seed: 0,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    pub fn validate<O: Objective + ?Sized>(&self, objective: &O) -> Result<()> {
        if !(self.max_budget > 0.0) {
            return Err(Error::InvalidParameter("budget must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("iteration cap must be positive"));
        }
        if self.initial_design.len() != objective.levels() {
            return Err(Error::DimensionMismatch { expected: objective.levels(), found: self.initial_design.len() });
        }
        if self.initial_design.iter().any(|n| *n == 0) {
            return Err(Error::InvalidParameter("every level needs an initial observation"));
        }
        if self.bins_per_dim.len() != objective.dim() {
            return Err(Error::DimensionMismatch { expected: objective.dim(), found: self.bins_per_dim.len() });
        }
        self.acquisition.validate()?;
        self.gp.validate()?;
        self.gridding(objective).validate()
    }

    pub fn gridding<O: Objective + ?Sized>(&self, objective: &O) -> GriddingConfig {
        GriddingConfig {
            bins_per_dim: self.bins_per_dim.clone(),
            xi_max: self.xi_max,
            learning_rate: self.learning_rate,
            bounds: objective.bounds().to_vec(),
        }
    }
}

/// Mixes a stream index into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const DESIGN_STREAM: u64 = 1;
const SURROGATE_STREAM: u64 = 1 << 32;

/// Surrogate fitting seed for iteration `t`.
pub fn surrogate_seed(seed: u64, iteration: usize) -> u64 {
    derive_seed(seed, SURROGATE_STREAM + iteration as u64)
}

/// Candidate pool of a run.
pub fn run_pool<O: Objective + ?Sized>(objective: &O, config: &RaalConfig) -> Result<CandidatePool> {
    generate_pool(objective.bounds(), config.pool_size, |x| objective.is_feasible(x), config.seed)
}

/// Pool indices of the initial design per level.
pub fn initial_design_indices(pool: &CandidatePool, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    let needed = sizes.iter().copied().max().unwrap_or(0);
    if needed > pool.len() {
        return Err(Error::InvalidParameter("initial design larger than the pool"));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, DESIGN_STREAM)));
    Ok(sizes.iter().map(|n| order[..*n].to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec<f64>,
    pub level: usize,
    pub worker: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `0` is the initial design.
    pub iteration: usize,
    /// Budget spent after this iteration.
    pub budget_spent: f64,
    pub xi: f64,
    pub batch: Vec<Evaluation>,
    /// Cost of this batch.
    pub batch_cost: f64,
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub rse: Option<f64>,
    pub solver_nodes: u64,
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub iterations: Vec<IterationRecord>,
}

impl RunRecord {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    /// First iteration whose error is below `threshold`.
    pub fn iterations_to_reach(&self, threshold: f64) -> Option<usize> {
        self.iterations.iter().find(|r| r.rse.is_some_and(|e| e < threshold)).map(|r| r.iteration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    IterationLimit,
    BudgetExhausted,
    /// The seeding program could not schedule anything.
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub status: RunStatus,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub data: MfDataset,
}

/// A run that stopped on an error, with everything recorded up to then.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub record: RunRecord,
    /// Evaluations of the interrupted batch that did finish.
    pub partial_batch: Vec<Evaluation>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed after {} iterations: {}", self.record.iterations.len(), self.error)
    }
}

impl core::error::Error for RunFailure {}

struct Loop<'a, O: ?Sized> {
    objective: &'a O,
    data: MfDataset,
    record: RunRecord,
}

impl<O: Objective + ?Sized> Loop<'_, O> {
    fn fail(self, error: Error, partial_batch: Vec<Evaluation>) -> RunFailure {
        RunFailure { error, record: self.record, partial_batch }
    }

    fn push_record(&mut self, iteration: usize, spent: f64, xi: f64, batch: Vec<Evaluation>, cost: f64, nodes: u64, optimal: bool) {
        let (best_point, best_value) = match self.data.best_top() {
            Some((p, v)) => (p.to_vec(), v),
            None => (Vec::new(), f64::INFINITY),
        };
        let rse = self.objective.optimum_value().map(|opt| compute_rse(best_value, opt));
        self.record.iterations.push(IterationRecord {
            iteration,
            budget_spent: spent,
            xi,
            batch,
            batch_cost: cost,
            best_value,
            best_point,
            rse,
            solver_nodes: nodes,
            proven_optimal: optimal,
        });
    }
}

fn evaluations(done: Vec<(Task, f64)>) -> Vec<Evaluation> {
    done.into_iter()
        .map(|(t, value)| Evaluation { point: t.point, level: t.level, worker: t.worker, value })
        .collect()
}

/// Runs the loop to completion.
pub fn run<O, D>(objective: &O, config: &RaalConfig, dispatcher: &mut D) -> Result<RunOutcome, RunFailure>
where
    O: Objective + ?Sized,
    D: Dispatcher,
{
    let levels = objective.levels();
    let mut state = Loop { objective, data: empty_dataset(levels), record: RunRecord::default() };
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => return Err(state.fail(err, Vec::new())),
            }
        };
    }
    attempt!(config.validate(objective));
    let mut pool = attempt!(run_pool(objective, config));
    let gridding = config.gridding(objective);
    let costs = objective.costs().to_vec();

    // Initial design, charged to the budget and dispatched like a batch.
    let design = attempt!(initial_design_indices(&pool, &config.initial_design, config.seed));
    let mut tasks = Vec::new();
    for (level, indices) in design.iter().enumerate() {
        for (k, i) in indices.iter().enumerate() {
            tasks.push(Task { point: pool.points()[*i].clone(), level, worker: k % config.resources.workers() });
        }
    }
    let results = dispatcher.dispatch(objective, &tasks);
    let mut batch = Vec::with_capacity(tasks.len());
    for (task, result) in tasks.into_iter().zip(results) {
        match result {
            Ok(value) => batch.push(Evaluation { point: task.point, level: task.level, worker: task.worker, value }),
            Err(e) => return Err(state.fail(e, batch)),
        }
    }
    let mut spent = 0.0;
    let mut counts = alloc::vec![0usize; levels];
    for e in &batch {
        attempt!(state.data.push(Observation::new(e.point.clone(), e.level, e.value)));
        counts[e.level] += 1;
    }
    let design_cost: f64 = counts.iter().zip(&costs).map(|(c, l)| *c as f64 * l).sum();
    spent += design_cost;
    let mut used: Vec<usize> = design.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    attempt!(pool.remove(&used));
    state.push_record(0, spent, 0.0, batch, design_cost, 0, true);

    let mut budget = BudgetState { spent, max_budget: config.max_budget, iteration: 0, max_iterations: config.max_iterations };
    let status = loop {
        if budget.iteration >= budget.max_iterations {
            break RunStatus::IterationLimit;
        }
        if budget.spent >= budget.max_budget {
            break RunStatus::BudgetExhausted;
        }
        if pool.is_empty() {
            break RunStatus::PoolExhausted;
        }
        let t = budget.iteration + 1;

        let gp = GpConfig {
            seed: surrogate_seed(config.seed, t),
            domain_width: Some(objective.bounds().iter().map(|(lo, hi)| hi - lo).collect()),
            ..config.gp.clone()
        };
        let model = attempt!(fit_mf_gp(&state.data, &gp));
        let (best_point, best_value) = match state.data.best_top() {
            Some((p, v)) => (p.to_vec(), v),
            None => return Err(state.fail(Error::MissingLevel(levels - 1), Vec::new())),
        };
        let incumbent = Incumbent { best_value, best_point };
        let table = attempt!(build_acq_table(&model, pool.points(), &incumbent, &config.acquisition));

        let (xi, grid) = if config.learning_rate == 0.0 {
            (0.0, attempt!(uniform_grid(pool.points(), &gridding)))
        } else {
            let xi = attempt!(xi_schedule(&gridding, budget.spent, budget.max_budget));
            let scores: Vec<f64> = (0..table.len()).map(|i| table.row_max(i)).collect();
            (xi, attempt!(adaptive_encode(pool.points(), &scores, xi, &gridding)))
        };
        let candidates: Vec<Vec<f64>> = grid.retained.iter().map(|i| pool.points()[*i].clone()).collect();
        let instance = attempt!(build_instance(
            &grid.encodings,
            &table.select_rows(&grid.retained),
            &costs,
            config.resources.capacities(),
        ));
        let plan = match solve_with_limit(&instance, config.node_limit) {
            Ok(plan) => plan,
            Err(limit) => limit.incumbent,
        };
        if plan.is_empty() {
            break RunStatus::PoolExhausted;
        }
        let cost = plan_cost(&instance, plan.selections());
        let done = match dispatch_batch(&plan, &candidates, objective, &config.resources, dispatcher) {
            Ok(done) => done,
            Err(e) => {
                let partial = evaluations(e.completed);
                return Err(state.fail(e.error, partial));
            }
        };
        let batch = evaluations(done);
        for e in &batch {
            attempt!(state.data.push(Observation::new(e.point.clone(), e.level, e.value)));
        }
        let chosen: Vec<usize> = plan.chosen_points().iter().map(|c| grid.retained[*c]).collect();
        attempt!(pool.remove(&chosen));
        budget.spent += cost;
        budget.iteration = t;
        let stats = plan.stats();
        state.push_record(t, budget.spent, xi, batch, cost, stats.nodes, stats.proven_optimal);
    };

    let Some(last) = state.record.last() else {
        return Err(state.fail(Error::Empty("run record"), Vec::new()));
    };
    let (best_point, best_value) = (last.best_point.clone(), last.best_value);
    Ok(RunOutcome { record: state.record, status, best_point, best_value, data: state.data })
}

fn empty_dataset(levels: usize) -> MfDataset {
    MfDataset::new(levels.max(1)).expect("one level is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{BenchmarkKind, BenchmarkProblem, FidelityMode};
    use alloc::vec;

    fn config(workers: usize, levels: usize) -> RaalConfig {
        RaalConfig {
            max_budget: 6.0,
            max_iterations: 4,
            initial_design: if levels == 1 { vec![2] } else { vec![5, 2] },
            pool_size: 60,
            bins_per_dim: vec![5],
            xi_max: 0.8,
            learning_rate: 0.0,
            acquisition: AcqConfig::default(),
            resources: ResourcePool::uniform(workers, 1.0).unwrap(),
            gp: GpConfig { mle_restarts: 2, ..GpConfig::default() },
            seed: 11,
            node_limit: 100_000,
        }
    }

    #[test]
    fn sequential_run_takes_one_point_per_iteration() {
        let p = BenchmarkProblem::new(BenchmarkKind::Forrester, FidelityMode::Single, 1).unwrap();
        let out = run(&p, &config(1, 1), &mut SequentialDispatcher).unwrap();
        assert_eq!(out.status, RunStatus::IterationLimit);
        for r in &out.record.iterations[1..] {
            assert_eq!(r.batch.len(), 1);
        }
        let total: f64 = out.record.iterations.iter().map(|r| r.batch_cost).sum();
        assert_eq!(total, out.record.last().unwrap().budget_spent);
    }

    #[test]
    fn budget_stop_and_monotone_incumbent() {
        let p = BenchmarkProblem::new(BenchmarkKind::Forrester, FidelityMode::Multi, 1).unwrap();
        let mut cfg = config(3, 2);
        cfg.learning_rate = 1.0;
        cfg.max_iterations = 50;
        let out = run(&p, &cfg, &mut SequentialDispatcher).unwrap();
        assert_eq!(out.status, RunStatus::BudgetExhausted);
        let best: Vec<f64> = out.record.iterations.iter().map(|r| r.best_value).collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        for r in &out.record.iterations[1..] {
            assert!(r.batch_cost <= 3.0 + 1e-9);
        }
    }

    #[test]
    fn seed_derivation_separates_streams() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(surrogate_seed(1, 1), surrogate_seed(2, 1));
    }
}
