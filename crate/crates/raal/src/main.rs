use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use raal::config::{CampaignConfig, OneOrMany};
use raal::{plot_directory, run_campaign};

#[derive(Parser)]
#[command(name = "raal", version, about = "Resource-aware multifidelity Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write traces, aggregates and a plot.
    Run {
        /// JSON campaign configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        benchmark: Option<String>,
        /// sf or mf
        #[arg(long)]
        fidelity: Option<String>,
        /// One or more worker counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        cpus: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        bins: Option<Vec<usize>>,
        #[arg(long = "eta-xi", value_delimiter = ',')]
        eta_xi: Option<Vec<f64>>,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "raal-out")]
        out: PathBuf,
    },
    /// Plot every aggregate CSV found in a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Median spent budget on the x axis.
        #[arg(long)]
        budget_axis: bool,
    },
}

fn many<T>(v: Vec<T>) -> OneOrMany<T> {
    OneOrMany::Many(v)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, benchmark, fidelity, cpus, bins, eta_xi, budget, runs, seed, out } => {
            let mut cfg = match &config {
                Some(path) => CampaignConfig::load(path)?,
                None => CampaignConfig::default(),
            };
            if let Some(v) = benchmark {
                cfg.benchmark = v;
            }
            if let Some(v) = fidelity {
                cfg.fidelity_mode = v;
            }
            if let Some(v) = cpus {
                cfg.cpus = many(v);
            }
            if let Some(v) = bins {
                cfg.bins = many(v);
            }
            if let Some(v) = eta_xi {
                cfg.eta_xi = many(v);
            }
            if let Some(v) = budget {
                cfg.budget = v;
            }
            if let Some(v) = runs {
                cfg.runs = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            let report = run_campaign(&cfg, &out)?;
            for r in &report.results {
                let reached = r.runs.iter().filter(|o| o.record.iterations_to_reach(1e-2).is_some()).count();
                println!("{}: {}/{} runs reached RSE < 1e-2", r.variant.label, reached, r.runs.len());
            }
            println!("wrote {} files to {}", report.files.len(), out.display());
            Ok(())
        }
        Command::Plot { input, out, budget_axis } => plot_directory(&input, &out, budget_axis),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
