//! A complete session with the default constrain-and-scale attack, printed as CSV.
//!
//! `cargo run --release --example federated_session -- 3` runs three rounds.

use chainfl::harness::{metrics_to_csv, run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(3);
    let cfg = ScenarioConfig { rounds, ..ScenarioConfig::default() };
    let out = run_scenario(&cfg)?;
    print!("{}", metrics_to_csv(&out.metrics)?);
    eprintln!("session {} on {} clients, {} malicious", out.session_id, out.clients.len(), out.truth.malicious_clients.len());
    Ok(())
}
