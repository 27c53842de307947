//! Contract reward over a run of sessions with privacy anomalies in sessions 3, 5 and 7,
//! and the benign reward share when half the clients are caught.

use chainfl::defender::{contract_reward_level, training_reward_value};

fn main() {
    let r = 100.0;
    let mut anomalies = 0;
    println!("session  R_C");
    for s in 1..=15 {
        if [3, 5, 7].contains(&s) {
            anomalies += 1;
        }
        println!("{s:>7}  {:.4}", contract_reward_level(r, anomalies, s));
    }

    let (rounds, k) = (5, 10);
    let r_c = 0.1 * r;
    let nominal = (r - r_c) / (rounds * k) as f64;
    for benign in [10, 9, 7, 5] {
        let paid = training_reward_value(r, r_c, rounds, benign);
        println!("{benign}/{k} benign: per-client reward {paid:.4} = {:.2}x nominal", paid / nominal);
    }
}
