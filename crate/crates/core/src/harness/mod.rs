//! Scenario runner: wires clients, contracts, ledger and oracles into a
//! multi-round session and reports per-round metrics.

mod config;
mod metrics;
mod runner;

pub use config::{ConfigError, ScenarioConfig};
pub use metrics::{
    defense_rates, emit_results, evaluate_model, inference_success_log10, inference_success_probability,
    metrics_from_csv, metrics_to_csv, metrics_to_json, replay_metrics, round_row, GroundTruth, OutputFormat,
    RoundMetrics, CSV_HEADER,
};
pub use runner::{pick_malicious, pretrain_global, run_scenario, ScenarioOutcome};
