//! Exact branch-and-bound for the seeding program.
//!
//! Candidates are visited in decreasing order of their best acquisition
//! density. At each candidate the search tries the fidelity prefixes
//! `0..k` for `k = M, …, 1`, places every level of the prefix on a worker,
//! and finally tries skipping the candidate. Workers with the same remaining
//! capacity are interchangeable, so only the first of them is tried.
//!
//! Every node is itself a feasible plan. A node is pruned when the cost that
//! can still be added cannot beat the incumbent, or cannot beat it on cost
//! and the acquisition mass cannot beat it either. The value bound is the
//! tighter of a per-item fractional knapsack and, per dimension, the linear
//! relaxation of a multiple-choice knapsack with one choice per bin.
//!
//! Candidates sharing every bin are interchangeable up to their values, so
//! only those that are best for some fidelity prefix enter the search.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{SeedingInstance, SeedingPlan, Selection, SolverStats, COST_TOLERANCE};

pub const DEFAULT_NODE_LIMIT: u64 = 2_000_000;

/// The search stopped early; `incumbent` is the best plan found so far.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLimitExceeded {
    pub incumbent: SeedingPlan,
}

impl fmt::Display for NodeLimitExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seeding search exceeded {} nodes", self.incumbent.stats().nodes)
    }
}

impl core::error::Error for NodeLimitExceeded {}

pub fn solve(instance: &SeedingInstance) -> Result<SeedingPlan, NodeLimitExceeded> {
    solve_with_limit(instance, DEFAULT_NODE_LIMIT)
}

pub fn solve_with_limit(instance: &SeedingInstance, node_limit: u64) -> Result<SeedingPlan, NodeLimitExceeded> {
    let mut search = Search::new(instance, node_limit);
    search.node(0);
    let stats = SolverStats { nodes: search.nodes, proven_optimal: !search.aborted };
    let plan = SeedingPlan::new(instance, core::mem::take(&mut search.best), stats);
    if search.aborted {
        Err(NodeLimitExceeded { incumbent: plan })
    } else {
        Ok(plan)
    }
}

struct Search<'a> {
    inst: &'a SeedingInstance,
    levels: usize,
    dims: usize,
    /// Candidates in visiting order and each candidate's position in it.
    order: Vec<usize>,
    rank: Vec<usize>,
    /// `(candidate, level)` by decreasing `a / λ`.
    items: Vec<(usize, usize)>,
    /// `prefix_cost[k] = Σ_{m<k} λ_m`.
    prefix_cost: Vec<f64>,
    /// `prefix_value[i * (M + 1) + k] = Σ_{m<k} a_i⁽ᵐ⁾`.
    prefix_value: Vec<f64>,

    loads: Vec<f64>,
    level_counts: Vec<usize>,
    value: f64,
    bin_used: Vec<bool>,
    current: Vec<Selection>,

    best: Vec<Selection>,
    best_cost: f64,
    best_value: f64,

    nodes: u64,
    limit: u64,
    aborted: bool,

    bin_best: Vec<f64>,
    bin_seen: Vec<bool>,
    segments: Vec<(f64, f64, f64)>,
}

/// Candidates that attain the best prefix value of their bin cell for at
/// least one prefix length, in index order.
fn dominant(inst: &SeedingInstance, prefix_value: &[f64]) -> Vec<usize> {
    let stride = inst.levels() + 1;
    let mut cells: Vec<usize> = (0..inst.len()).collect();
    cells.sort_by(|a, b| inst.encodings()[*a].active().cmp(inst.encodings()[*b].active()).then(a.cmp(b)));
    let mut keep = vec![false; inst.len()];
    let mut start = 0;
    while start < cells.len() {
        let cell = inst.encodings()[cells[start]].active();
        let mut end = start + 1;
        while end < cells.len() && inst.encodings()[cells[end]].active() == cell {
            end += 1;
        }
        for k in 1..stride {
            let mut arg = cells[start];
            for &i in &cells[start + 1..end] {
                if prefix_value[i * stride + k] > prefix_value[arg * stride + k] {
                    arg = i;
                }
            }
            keep[arg] = true;
        }
        start = end;
    }
    (0..inst.len()).filter(|i| keep[*i]).collect()
}

impl<'a> Search<'a> {
    fn new(inst: &'a SeedingInstance, limit: u64) -> Self {
        let (n, levels) = (inst.len(), inst.levels());
        let mut prefix_cost = vec![0.0; levels + 1];
        for m in 0..levels {
            prefix_cost[m + 1] = prefix_cost[m] + inst.costs()[m];
        }
        let mut prefix_value = vec![0.0; n * (levels + 1)];
        for i in 0..n {
            for m in 0..levels {
                prefix_value[i * (levels + 1) + m + 1] = prefix_value[i * (levels + 1) + m] + inst.value(i, m);
            }
        }
        let density = |i: usize| {
            (1..=levels)
                .map(|k| prefix_value[i * (levels + 1) + k] / prefix_cost[k])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut order = dominant(inst, &prefix_value);
        order.sort_by(|a, b| density(*b).total_cmp(&density(*a)).then(a.cmp(b)));
        let mut rank = vec![0; n];
        for (pos, i) in order.iter().enumerate() {
            rank[*i] = pos;
        }
        let mut items: Vec<(usize, usize)> = order.iter().flat_map(|&i| (0..levels).map(move |m| (i, m))).collect();
        let item_density = |(i, m): (usize, usize)| inst.value(i, m) / inst.costs()[m];
        items.sort_by(|a, b| item_density(*b).total_cmp(&item_density(*a)).then(a.cmp(b)));

        Search {
            inst,
            levels,
            dims: inst.encodings().first().map_or(0, |e| e.active().len()),
            order,
            rank,
            items,
            prefix_cost,
            prefix_value,
            loads: vec![0.0; inst.workers()],
            level_counts: vec![0; levels],
            value: 0.0,
            bin_used: vec![false; inst.total_bins()],
            current: Vec::new(),
            best: Vec::new(),
            best_cost: 0.0,
            best_value: 0.0,
            nodes: 0,
            limit,
            aborted: false,
            bin_best: vec![0.0; inst.total_bins() * (levels + 1)],
            bin_seen: vec![false; inst.total_bins()],
            segments: Vec::new(),
        }
    }

    fn cost(&self) -> f64 {
        self.level_counts.iter().zip(self.inst.costs()).map(|(c, l)| *c as f64 * l).sum()
    }

    fn conflicts(&self, i: usize) -> bool {
        self.inst.encodings()[i].active().iter().any(|e| self.bin_used[*e])
    }

    fn set_bins(&mut self, i: usize, used: bool) {
        for e in self.inst.encodings()[i].active() {
            self.bin_used[*e] = used;
        }
    }

    fn consider_incumbent(&mut self) {
        let cost = self.cost();
        let better = cost > self.best_cost + COST_TOLERANCE
            || (cost >= self.best_cost - COST_TOLERANCE && self.value > self.best_value);
        if better {
            self.best_cost = cost;
            self.best_value = self.value;
            self.best.clone_from(&self.current);
        }
    }

    fn node(&mut self, pos: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.limit {
            self.aborted = true;
            return;
        }
        self.consider_incumbent();
        if pos == self.order.len() || self.prune(pos) {
            return;
        }
        let i = self.order[pos];
        if !self.conflicts(i) {
            self.set_bins(i, true);
            for k in (1..=self.levels).rev() {
                self.assign(i, 0, k, pos);
            }
            self.set_bins(i, false);
        }
        self.node(pos + 1);
    }

    /// Places level `m` of the prefix `0..k` of candidate `i`.
    fn assign(&mut self, i: usize, m: usize, k: usize, pos: usize) {
        if m == k {
            self.node(pos + 1);
            return;
        }
        let lambda = self.inst.costs()[m];
        let caps = self.inst.capacities();
        for g in 0..self.loads.len() {
            let remaining = caps[g] - self.loads[g];
            if lambda > remaining + COST_TOLERANCE {
                continue;
            }
            if (0..g).any(|h| caps[h] - self.loads[h] == remaining) {
                continue;
            }
            let (load, value) = (self.loads[g], self.value);
            self.loads[g] += lambda;
            self.level_counts[m] += 1;
            self.value += self.inst.value(i, m);
            self.current.push(Selection { candidate: i, level: m, worker: g });
            self.assign(i, m + 1, k, pos);
            self.current.pop();
            self.value = value;
            self.level_counts[m] -= 1;
            self.loads[g] = load;
            if self.aborted {
                return;
            }
        }
    }

    fn prune(&mut self, pos: usize) -> bool {
        let caps = self.inst.capacities();
        let mut room = 0.0;
        let mut widest: f64 = 0.0;
        for (c, l) in caps.iter().zip(&self.loads) {
            let r = (c - l).max(0.0);
            room += r;
            widest = widest.max(r);
        }
        // Longest fidelity prefix that any remaining candidate could still add.
        let mut kmax = 0;
        while kmax < self.levels
            && self.inst.costs()[kmax] <= widest + COST_TOLERANCE
            && self.prefix_cost[kmax + 1] <= room + COST_TOLERANCE
        {
            kmax += 1;
        }
        if kmax == 0 {
            return true;
        }
        let item_cost = self.prefix_cost[kmax];
        let stride = self.levels + 1;

        let mut cost_add = room;
        let mut group_value = f64::INFINITY;
        let mut any = false;
        for j in 0..self.dims {
            for b in self.bin_seen.iter_mut() {
                *b = false;
            }
            let mut bins = 0;
            for &i in &self.order[pos..] {
                if self.conflicts(i) {
                    continue;
                }
                any = true;
                let e = self.inst.encodings()[i].active()[j];
                let best = &mut self.bin_best[e * stride..(e + 1) * stride];
                let values = &self.prefix_value[i * stride..(i + 1) * stride];
                if self.bin_seen[e] {
                    for k in 1..=kmax {
                        best[k] = best[k].max(values[k]);
                    }
                } else {
                    self.bin_seen[e] = true;
                    bins += 1;
                    best[..=kmax].copy_from_slice(&values[..=kmax]);
                }
            }
            cost_add = cost_add.min(bins as f64 * item_cost);

            // Upper concave hull of each bin's (cost, value) options.
            self.segments.clear();
            for e in 0..self.bin_seen.len() {
                if !self.bin_seen[e] {
                    continue;
                }
                let best = &self.bin_best[e * stride..(e + 1) * stride];
                let mut at = 0;
                while at < kmax {
                    let mut next = at + 1;
                    let mut slope = f64::NEG_INFINITY;
                    for k in at + 1..=kmax {
                        let s = (best[k] - best[at]) / (self.prefix_cost[k] - self.prefix_cost[at]);
                        if s >= slope {
                            slope = s;
                            next = k;
                        }
                    }
                    if slope <= 0.0 {
                        break;
                    }
                    let dc = self.prefix_cost[next] - self.prefix_cost[at];
                    self.segments.push((slope, dc, best[next] - best[at]));
                    at = next;
                }
            }
            self.segments.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut cap = room;
            let mut total = 0.0;
            for &(_, dc, dv) in &self.segments {
                if cap <= 0.0 {
                    break;
                }
                total += (cap / dc).min(1.0) * dv;
                cap -= dc;
            }
            group_value = group_value.min(total);
        }
        if !any {
            return true;
        }

        let mut cap = room;
        let mut knapsack = 0.0;
        for &(i, m) in &self.items {
            if cap <= 0.0 {
                break;
            }
            if m >= kmax || self.rank[i] < pos || self.conflicts(i) {
                continue;
            }
            let a = self.inst.value(i, m);
            if a <= 0.0 {
                break;
            }
            let lambda = self.inst.costs()[m];
            knapsack += (cap / lambda).min(1.0) * a;
            cap -= lambda;
        }

        let cost_bound = self.cost() + cost_add;
        let value_bound = self.value + knapsack.min(group_value);
        if cost_bound < self.best_cost - COST_TOLERANCE {
            return true;
        }
        cost_bound <= self.best_cost + COST_TOLERANCE && value_bound <= self.best_value
    }
}
