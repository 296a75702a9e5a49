//! Seeded multi-run campaigns.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use raal_core::benchmarks::{BenchmarkProblem, FidelityMode};
use raal_core::engine::{run, RaalConfig, RunOutcome};

use crate::config::{CampaignConfig, Variant};
use crate::dispatch::{Latency, ThreadedDispatcher};
use crate::output::{aggregate, trace_rows, write_aggregate, write_trace, AggregateRow, TraceRow};
use crate::plot::{render_svg, PlotOptions, Series};

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub runs: Vec<RunOutcome>,
    pub traces: Vec<Vec<TraceRow>>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub results: Vec<VariantResult>,
    pub files: Vec<PathBuf>,
}

/// Runs `runs` seeds of one engine configuration in parallel; run `r` uses
/// seed `base_seed + r`.
pub fn execute_runs(
    problem: &BenchmarkProblem,
    engine: &RaalConfig,
    runs: usize,
    base_seed: u64,
    latency: Duration,
) -> Result<Vec<RunOutcome>> {
    let objective = Latency { inner: problem.clone(), per_unit: latency };
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let config = RaalConfig { seed: base_seed.wrapping_add(r as u64), ..engine.clone() };
            run(&objective, &config, &mut ThreadedDispatcher).map_err(|f| anyhow!("run {r}: {f}"))
        })
        .collect()
}

pub fn mode_name(mode: FidelityMode) -> &'static str {
    match mode {
        FidelityMode::Single => "sf",
        FidelityMode::Multi => "mf",
    }
}

fn check_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".raal-write-probe");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

/// Runs every configuration and writes its traces, aggregates and one plot.
pub fn run_campaign(config: &CampaignConfig, out_dir: &Path) -> Result<CampaignReport> {
    let problem = config.problem()?;
    let variants = config.variants()?;
    check_writable(out_dir)?;
    let latency = Duration::from_millis(config.latency_ms);

    let mut results = Vec::with_capacity(variants.len());
    for variant in variants {
        let runs = execute_runs(&problem, &variant.engine, config.runs, config.seed, latency)
            .with_context(|| format!("configuration {}", variant.label))?;
        let traces: Vec<Vec<TraceRow>> = runs.iter().enumerate().map(|(r, o)| trace_rows(r, &o.record)).collect();
        let aggregate = aggregate(&traces)?;
        results.push(VariantResult { variant, runs, traces, aggregate });
    }

    let mut files = Vec::new();
    for res in &results {
        for (r, rows) in res.traces.iter().enumerate() {
            let path = out_dir.join(format!("trace_{}_run{r}.csv", res.variant.label));
            write_trace(&path, rows)?;
            files.push(path);
        }
        let path = out_dir.join(format!("aggregate_{}.csv", res.variant.label));
        write_aggregate(&path, &res.aggregate)?;
        files.push(path);
    }
    let series: Vec<Series> = results
        .iter()
        .map(|r| Series { label: r.variant.legend(), rows: r.aggregate.clone() })
        .collect();
    let mode = mode_name(problem.mode());
    let title = format!("{} ({}), median RSE with interquartile band", problem.name(), mode);
    let svg = render_svg(&series, &PlotOptions { title, budget_axis: config.budget_axis })?;
    let path = out_dir.join(format!("plot_{}_{}.svg", problem.name(), mode));
    fs::write(&path, svg).with_context(|| format!("cannot write {}", path.display()))?;
    files.push(path);
    Ok(CampaignReport { results, files })
}

/// Renders every `aggregate_<label>.csv` in `dir`, sorted by label.
pub fn plot_directory(dir: &Path, out: &Path, budget_axis: bool) -> Result<()> {
    let mut entries: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let label = name.strip_prefix("aggregate_")?.strip_suffix(".csv")?.to_string();
            Some((label, p))
        })
        .collect();
    entries.sort();
    let series = entries
        .iter()
        .map(|(label, p)| Ok(Series { label: label.clone(), rows: crate::output::read_aggregate(p)? }))
        .collect::<Result<Vec<_>>>()?;
    anyhow::ensure!(!series.is_empty(), "no aggregate_*.csv files in {}", dir.display());
    let title = format!("median RSE, {}", dir.display());
    let svg = render_svg(&series, &PlotOptions { title, budget_axis })?;
    fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))
}
