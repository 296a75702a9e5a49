//! Trace and aggregate CSV files.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use raal_core::engine::RunRecord;
use raal_core::stats::quantile;

pub const TRACE_HEADER: [&str; 7] = ["run_id", "iteration", "budget_spent", "xi", "batch_size", "best_y_hf", "rse"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: usize,
    pub iteration: usize,
    pub budget_spent: f64,
    pub xi: f64,
    pub batch_size: usize,
    pub best_y_hf: f64,
    pub rse: Option<f64>,
}

pub fn trace_rows(run_id: usize, record: &RunRecord) -> Vec<TraceRow> {
    record
        .iterations
        .iter()
        .map(|r| TraceRow {
            run_id,
            iteration: r.iteration,
            budget_spent: r.budget_spent,
            xi: r.xi,
            batch_size: r.batch.len(),
            best_y_hf: r.best_value,
            rse: r.rse,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub budget_median: f64,
    pub rse_median: f64,
    pub rse_p25: f64,
    pub rse_p75: f64,
}

/// Median and quartiles of the error per iteration across runs. A run that
/// stopped early keeps contributing its final values.
pub fn aggregate(runs: &[Vec<TraceRow>]) -> Result<Vec<AggregateRow>> {
    ensure!(runs.iter().all(|r| !r.is_empty()), "cannot aggregate an empty trace");
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let at = |r: &Vec<TraceRow>| r[t.min(r.len() - 1)].clone();
        let rse: Vec<f64> = runs.iter().map(|r| at(r).rse.unwrap_or(f64::NAN)).collect();
        ensure!(rse.iter().all(|v| v.is_finite()), "aggregation needs a known optimum");
        let budget: Vec<f64> = runs.iter().map(|r| at(r).budget_spent).collect();
        out.push(AggregateRow {
            iteration: t,
            budget_median: quantile(&budget, 0.5).unwrap_or(0.0),
            rse_median: quantile(&rse, 0.5).unwrap_or(0.0),
            rse_p25: quantile(&rse, 0.25).unwrap_or(0.0),
            rse_p75: quantile(&rse, 0.75).unwrap_or(0.0),
        });
    }
    Ok(out)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_rows(path, rows, &TRACE_HEADER)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_rows(path, rows, &["iteration", "budget_median", "rse_median", "rse_p25", "rse_p75"])
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<AggregateRow>, _>>()
        .with_context(|| format!("malformed aggregate {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iteration: usize, rse: f64) -> TraceRow {
        TraceRow { run_id: 0, iteration, budget_spent: iteration as f64, xi: 0.0, batch_size: 1, best_y_hf: rse, rse: Some(rse) }
    }

    #[test]
    fn quartiles_across_runs() {
        let runs = vec![vec![row(0, 1.0)], vec![row(0, 2.0)], vec![row(0, 3.0)]];
        let agg = aggregate(&runs).unwrap();
        assert_eq!(agg[0].rse_median, 2.0);
        assert_eq!(agg[0].rse_p25, 1.5);
        assert_eq!(agg[0].rse_p75, 2.5);
    }

    #[test]
    fn short_runs_carry_forward() {
        let runs = vec![vec![row(0, 4.0), row(1, 1.0), row(2, 0.5)], vec![row(0, 4.0)]];
        let agg = aggregate(&runs).unwrap();
        assert_eq!(agg.len(), 3);
        assert_eq!(agg[2].rse_median, 2.25);
    }
}
