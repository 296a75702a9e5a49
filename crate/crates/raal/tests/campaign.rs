use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use raal::config::CampaignConfig;
use raal::dispatch::{Latency, ThreadedDispatcher};
use raal::output::{aggregate, AggregateRow, TraceRow};
use raal::plot::{render_svg, PlotOptions, Series};
use raal::run_campaign;
use raal_core::benchmarks::{BenchmarkKind, BenchmarkProblem, FidelityMode};
use raal_core::engine::{Dispatcher, Objective, Task};

fn small(extra: &str) -> CampaignConfig {
    let text = format!(
        r#"{{"benchmark": "forrester", "cpus": [1, 5], "budget": 6, "runs": 2, "pool_size": 60, "mle_restarts": 2{extra}}}"#
    );
    CampaignConfig::from_json(&text).unwrap()
}

fn sorted_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn two_configurations_two_runs_write_seven_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_campaign(&small(""), dir.path()).unwrap();
    assert_eq!(report.files.len(), 7);
    assert_eq!(
        sorted_names(dir.path()),
        [
            "aggregate_g1_e5_eta0.csv",
            "aggregate_g5_e5_eta0.csv",
            "plot_forrester_sf.svg",
            "trace_g1_e5_eta0_run0.csv",
            "trace_g1_e5_eta0_run1.csv",
            "trace_g5_e5_eta0_run0.csv",
            "trace_g5_e5_eta0_run1.csv",
        ]
    );
    for res in &report.results {
        for (r, outcome) in res.runs.iter().enumerate() {
            let path = dir.path().join(format!("trace_{}_run{r}.csv", res.variant.label));
            let text = fs::read_to_string(path).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap(), "run_id,iteration,budget_spent,xi,batch_size,best_y_hf,rse");
            assert_eq!(lines.count(), outcome.record.iterations.len());
        }
        for row in &res.aggregate {
            assert!(row.rse_p25 <= row.rse_median && row.rse_median <= row.rse_p75);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small(r#", "fidelity_mode": "mf", "eta_xi": [0, 1]"#);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_campaign(&cfg, a.path()).unwrap();
    run_campaign(&cfg, b.path()).unwrap();
    let names = sorted_names(a.path());
    assert_eq!(names, sorted_names(b.path()));
    assert_eq!(names.len(), 4 * 2 + 4 + 1);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn runs_share_the_initial_design_across_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_campaign(&small(""), dir.path()).unwrap();
    for r in 0..2 {
        let first = &report.results[0].runs[r].record.iterations[0].batch;
        let second = &report.results[1].runs[r].record.iterations[0].batch;
        let points = |b: &Vec<raal_core::engine::Evaluation>| b.iter().map(|e| e.point.clone()).collect::<Vec<_>>();
        assert_eq!(points(first), points(second));
    }
}

#[test]
fn unwritable_output_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("taken");
    fs::write(&blocker, b"not a directory").unwrap();
    let start = Instant::now();
    let err = run_campaign(&small(r#", "latency_ms": 1000"#), &blocker.join("out")).unwrap_err();
    assert!(format!("{err:#}").contains("output directory"), "{err:#}");
    assert!(start.elapsed() < Duration::from_millis(900));
}

fn forrester() -> BenchmarkProblem {
    BenchmarkProblem::new(BenchmarkKind::Forrester, FidelityMode::Multi, 1).unwrap()
}

#[test]
fn five_workers_run_in_parallel() {
    let slow = Latency { inner: forrester(), per_unit: Duration::from_millis(300) };
    let tasks: Vec<Task> = (0..5).map(|g| Task { point: vec![0.1 * g as f64], level: 1, worker: g }).collect();
    let start = Instant::now();
    let results = ThreadedDispatcher.dispatch(&slow, &tasks);
    let elapsed = start.elapsed();
    assert!(elapsed >= Duration::from_millis(300));
    assert!(elapsed < Duration::from_millis(600), "{elapsed:?}");
    for (t, r) in tasks.iter().zip(results) {
        assert_eq!(r.unwrap(), forrester().evaluate(&t.point, 1).unwrap());
    }
}

#[test]
fn one_worker_runs_its_tasks_in_turn() {
    let slow = Latency { inner: forrester(), per_unit: Duration::from_millis(100) };
    let tasks: Vec<Task> = (0..3).map(|k| Task { point: vec![0.2 * k as f64], level: 1, worker: 0 }).collect();
    let start = Instant::now();
    ThreadedDispatcher.dispatch(&slow, &tasks);
    assert!(start.elapsed() >= Duration::from_millis(300));
}

#[test]
fn empty_batches_and_level_tags() {
    assert!(ThreadedDispatcher.dispatch(&forrester(), &[]).is_empty());
    let tasks = vec![
        Task { point: vec![0.3], level: 0, worker: 1 },
        Task { point: vec![0.3], level: 1, worker: 0 },
        Task { point: vec![0.7], level: 0, worker: 1 },
    ];
    let got: Vec<f64> = ThreadedDispatcher.dispatch(&forrester(), &tasks).into_iter().map(Result::unwrap).collect();
    let want: Vec<f64> = tasks.iter().map(|t| forrester().evaluate(&t.point, t.level).unwrap()).collect();
    assert_eq!(got, want);
    let bad = [Task { point: vec![0.3], level: 2, worker: 0 }];
    assert!(ThreadedDispatcher.dispatch(&forrester(), &bad)[0].is_err());
}

fn row(run_id: usize, iteration: usize, rse: f64) -> TraceRow {
    TraceRow { run_id, iteration, budget_spent: iteration as f64, xi: 0.0, batch_size: 1, best_y_hf: 0.0, rse: Some(rse) }
}

#[test]
fn aggregate_uses_linear_quantiles() {
    let runs = vec![vec![row(0, 0, 1.0)], vec![row(1, 0, 2.0)], vec![row(2, 0, 3.0)]];
    let agg = aggregate(&runs).unwrap();
    assert_eq!((agg[0].rse_median, agg[0].rse_p25, agg[0].rse_p75), (2.0, 1.5, 2.5));
}

fn attr<'a>(element: &'a str, name: &str) -> Option<&'a str> {
    element.split(&format!(" {name}=\"")).nth(1).and_then(|s| s.split('"').next())
}

fn elements<'a>(svg: &'a str, tag: &str, class: &str) -> Vec<&'a str> {
    svg.split('<').filter(|e| e.starts_with(tag) && attr(e, "class") == Some(class)).collect()
}

fn coords(points: &str) -> Vec<(f64, f64)> {
    points
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn series(label: &str, scale: f64) -> Series {
    let rows = (0..6)
        .map(|i| {
            let m = scale * 0.3f64.powi(i as i32);
            AggregateRow { iteration: i, budget_median: 2.0 * i as f64, rse_median: m, rse_p25: m * 0.4, rse_p75: m * 3.0 }
        })
        .collect();
    Series { label: label.into(), rows }
}

#[test]
fn bands_enclose_the_median() {
    let svg = render_svg(&[series("a", 1.0)], &PlotOptions::default()).unwrap();
    let band = coords(attr(elements(&svg, "polygon", "band")[0], "points").unwrap());
    let median = coords(attr(elements(&svg, "polyline", "median")[0], "points").unwrap());
    assert_eq!(median.len(), 6);
    assert_eq!(band.len(), 12);
    for (k, (x, y)) in median.iter().enumerate() {
        let upper = band[k];
        let lower = band[band.len() - 1 - k];
        assert_eq!((upper.0, lower.0), (*x, *x));
        // SVG y grows downwards.
        assert!(upper.1 <= *y && *y <= lower.1);
    }
}

#[test]
fn two_configurations_get_two_legend_entries_with_distinct_strokes() {
    let svg = render_svg(&[series("sequential", 1.0), series("RAAL 5 CPUs", 0.5)], &PlotOptions::default()).unwrap();
    let legends: Vec<&str> = svg.split("<g class=\"legend\">").skip(1).collect();
    assert_eq!(legends.len(), 2);
    assert!(legends[0].contains(">sequential</text>") && legends[1].contains(">RAAL 5 CPUs</text>"));
    let style = |e: &str| (attr(e, "stroke").map(String::from), attr(e, "stroke-dasharray").map(String::from));
    let lines = elements(&svg, "polyline", "median");
    assert_eq!(lines.len(), 2);
    assert_ne!(style(lines[0]), style(lines[1]));
}

#[test]
fn budget_axis_uses_spent_budget() {
    let s = series("a", 1.0);
    let by_iter = render_svg(&[s.clone()], &PlotOptions::default()).unwrap();
    let by_budget = render_svg(&[s], &PlotOptions { budget_axis: true, ..PlotOptions::default() }).unwrap();
    assert!(by_budget.contains(">budget spent</text>") && by_iter.contains(">iteration</text>"));
}

#[test]
fn cli_runs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"cpus": 2, "budget": 5, "runs": 2, "pool_size": 50, "mle_restarts": 2}"#).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_raal"))
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--cpus", "1,2", "--bins", "4", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(sorted_names(&out).len(), 2 * 2 + 2 + 1);
    assert!(out.join("aggregate_g2_e4_eta0.csv").exists());

    let svg = dir.path().join("all.svg");
    let plot = Command::new(env!("CARGO_BIN_EXE_raal")).args(["plot", "--in"]).arg(&out).arg("--out").arg(&svg).output().unwrap();
    assert!(plot.status.success());
    assert_eq!(fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 2);
}

#[test]
fn cli_reports_errors_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_raal"))
        .args(["run", "--benchmark", "ackley", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.starts_with("error:") && stderr.contains("ackley"), "{stderr}");

    let empty = Command::new(env!("CARGO_BIN_EXE_raal")).args(["plot", "--in"]).arg(dir.path()).arg("--out").arg(dir.path().join("x.svg")).output().unwrap();
    assert!(!empty.status.success());
}
