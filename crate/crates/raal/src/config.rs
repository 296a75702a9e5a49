//! Campaign configuration files.
//!
//! A configuration is a JSON object. `cpus`, `bins` and `eta_xi` accept a
//! single value or a list; the campaign runs every combination.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use raal_core::acquisition::AcqConfig;
use raal_core::benchmarks::{BenchmarkKind, BenchmarkProblem, FidelityMode};
use raal_core::engine::{Objective, RaalConfig, ResourcePool};
use raal_core::gp::GpConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// `forrester`, `sin2` or `rosenbrock`.
    pub benchmark: String,
    /// `sf` or `mf`.
    pub fidelity_mode: String,
    /// Problem dimension; only Rosenbrock accepts more than 1.
    pub dims: Option<usize>,
    pub cpus: OneOrMany<usize>,
    /// Bins per dimension.
    pub bins: OneOrMany<usize>,
    pub eta_xi: OneOrMany<f64>,
    pub xi_max: f64,
    pub budget: f64,
    pub max_iters: usize,
    /// Defaults to `100 × dims`.
    pub pool_size: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub zeta: f64,
    /// Worker capacity; by default 1, or the cost of one evaluation at every
    /// level for a single multifidelity worker.
    pub capacity: Option<f64>,
    pub initial_lf: usize,
    pub initial_hf: usize,
    pub classic_rosenbrock: bool,
    /// Artificial evaluation latency per unit of cost.
    pub latency_ms: u64,
    pub mle_restarts: usize,
    pub node_limit: u64,
    /// Plot against spent budget instead of iterations.
    pub budget_axis: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            benchmark: "forrester".into(),
            fidelity_mode: "sf".into(),
            dims: None,
            cpus: OneOrMany::Many(vec![1, 2, 5]),
            bins: OneOrMany::One(5),
            eta_xi: OneOrMany::One(0.0),
            xi_max: 0.8,
            budget: 20.0,
            max_iters: 100,
            pool_size: None,
            runs: 20,
            seed: 0,
            zeta: 0.0,
            capacity: None,
            initial_lf: 5,
            initial_hf: 2,
            classic_rosenbrock: false,
            latency_ms: 0,
            mle_restarts: 5,
            node_limit: raal_core::seeding::DEFAULT_NODE_LIMIT,
            budget_axis: false,
        }
    }
}

/// One point of the `cpus × bins × eta_xi` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub cpus: usize,
    pub bins: usize,
    pub eta_xi: f64,
    /// Engine settings; the seed is replaced per run.
    pub engine: RaalConfig,
}

impl Variant {
    pub fn legend(&self) -> String {
        let head = if self.cpus == 1 { "sequential".to_string() } else { format!("RAAL {} CPUs", self.cpus) };
        format!("{head}, E={}, eta={}", self.bins, self.eta_xi)
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid campaign configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn mode(&self) -> Result<FidelityMode> {
        match self.fidelity_mode.as_str() {
            "sf" => Ok(FidelityMode::Single),
            "mf" => Ok(FidelityMode::Multi),
            other => bail!("unknown fidelity mode `{other}` (expected sf or mf)"),
        }
    }

    pub fn problem(&self) -> Result<BenchmarkProblem> {
        let mut kind = BenchmarkKind::from_name(&self.benchmark)
            .with_context(|| format!("unknown benchmark `{}`", self.benchmark))?;
        if let BenchmarkKind::Rosenbrock { classic } = &mut kind {
            *classic = self.classic_rosenbrock;
        }
        let dims = self.dims.unwrap_or(if matches!(kind, BenchmarkKind::Rosenbrock { .. }) { 2 } else { 1 });
        BenchmarkProblem::new(kind, self.mode()?, dims).map_err(|e| anyhow::anyhow!("{}: {e}", self.benchmark))
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        ensure!(self.runs >= 1, "runs must be at least 1");
        ensure!(self.budget > 0.0, "budget must be positive");
        let problem = self.problem()?;
        let levels = problem.levels();
        let (cpus, bins, etas) = (self.cpus.values(), self.bins.values(), self.eta_xi.values());
        ensure!(!cpus.is_empty() && !bins.is_empty() && !etas.is_empty(), "cpus, bins and eta_xi must be nonempty");
        let mut out = Vec::new();
        for &g in &cpus {
            ensure!(g >= 1, "cpus must be at least 1");
            for &e in &bins {
                for &eta in &etas {
                    let capacity = self.capacity.unwrap_or(if g == 1 && levels > 1 {
                        problem.costs().iter().sum()
                    } else {
                        1.0
                    });
                    let initial_design = if levels == 1 { vec![self.initial_hf] } else { vec![self.initial_lf, self.initial_hf] };
                    let engine = RaalConfig {
                        max_budget: self.budget,
                        max_iterations: self.max_iters,
                        initial_design,
                        pool_size: self.pool_size.unwrap_or(100 * problem.dim()),
                        bins_per_dim: vec![e; problem.dim()],
                        xi_max: self.xi_max,
                        learning_rate: eta,
                        acquisition: AcqConfig { zeta: self.zeta, maximize: false },
                        resources: ResourcePool::uniform(g, capacity).map_err(|e| anyhow::anyhow!("{e}"))?,
                        gp: GpConfig { mle_restarts: self.mle_restarts, ..GpConfig::default() },
                        seed: self.seed,
                        node_limit: self.node_limit,
                    };
                    engine.validate(&problem).map_err(|err| anyhow::anyhow!("cpus={g} bins={e} eta_xi={eta}: {err}"))?;
                    out.push(Variant { label: format!("g{g}_e{e}_eta{eta}"), cpus: g, bins: e, eta_xi: eta, engine });
                }
            }
        }
        Ok(out)
    }
}
