//! Experiment harness on top of `raal-core`: threaded batch dispatch, JSON
//! campaign configuration, CSV traces and SVG convergence plots.

pub mod campaign;
pub mod config;
pub mod dispatch;
pub mod output;
pub mod plot;

pub use campaign::{execute_runs, plot_directory, run_campaign, CampaignReport};
pub use config::CampaignConfig;
pub use dispatch::ThreadedDispatcher;
