//! Release rules of the key-holding contract: sums pass, multi-model
//! aggregates pass with offsets removed, a single model is refused and penalised.

use chainfl::defender::{classify, contract_reward_level, penalty_reward, Release, NOISE_FLOOR};

fn main() {
    let sum = classify(&[6.0, 6.0, 6.0, 6.0], &[], NOISE_FLOOR);
    println!("slot sum            -> {sum:?}");

    // two models with offsets 0.5 and -0.2 were added: (2.3 - 0.3) / 2 and (4.3 - 0.3) / 2
    let model = classify(&[2.3, 4.3], &[0.5, -0.2], NOISE_FLOOR);
    println!("two-model aggregate -> {model:?}");

    let single = classify(&[2.3, 4.3], &[0.5], NOISE_FLOOR);
    assert_eq!(single, Release::Anomaly);
    println!("single model        -> {single:?}");

    let r = 100.0;
    println!("\ncontract reward after each anomaly (R = {r}):");
    for (anomalies_before, sessions) in [(0, 1), (1, 4), (2, 6)] {
        println!(
            "  phi = {anomalies_before}, s = {sessions}: penalty sets R_C = {:.4}",
            penalty_reward(r, anomalies_before, sessions)
        );
    }
    println!("  after 100 clean sessions with 3 anomalies: {:.4}", contract_reward_level(r, 3, 100));
}
