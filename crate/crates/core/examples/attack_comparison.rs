//! Final-round accuracy with and without the defense for every attack mode.

use chainfl::clients::AttackMode;
use chainfl::harness::{run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(1);
    println!("{:<20} {:>14} {:>14} {:>9}", "attack", "undefended", "defended", "TPR/TNR");
    for mode in [AttackMode::Untargeted, AttackMode::Backdoor, AttackMode::ConstrainAndScale, AttackMode::Dba] {
        let base = ScenarioConfig { attack_mode: mode, rounds: 3, seed, ..ScenarioConfig::default() };
        let plain = run_scenario(&ScenarioConfig { defense: false, ..base.clone() })?;
        let guarded = run_scenario(&base)?;
        let (p, g) = (plain.final_metrics(), guarded.final_metrics());
        println!(
            "{:<20} MA {:.3} BA {:.3}  MA {:.3} BA {:.3}  {:.2}/{:.2}",
            mode.name(),
            p.ma,
            p.ba,
            g.ma,
            g.ba,
            g.tpr,
            g.tnr
        );
    }
    Ok(())
}
