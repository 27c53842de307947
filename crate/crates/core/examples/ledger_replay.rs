//! Rebuild per-round metrics from an exported ledger and compare with the live run.

use chainfl::harness::{replay_metrics, run_scenario, ScenarioConfig};
use chainfl::ledger::{Ledger, TxType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig { rounds: 2, dropout_prob: 0.2, ..ScenarioConfig::default() };
    let out = run_scenario(&cfg)?;
    let export = out.ledger_export();
    let ledger = Ledger::import_jsonl(export.as_bytes())?;
    ledger.verify()?;
    for t in [TxType::TT1, TxType::TT2, TxType::TT3, TxType::TT5, TxType::TT6, TxType::TT7] {
        println!("{t:?}: {}", ledger.count(t));
    }
    let replayed = replay_metrics(&ledger, &out.session_id, &out.truth, &out.task.test)?;
    println!("replayed metrics equal live metrics: {}", replayed == out.metrics);
    Ok(())
}
