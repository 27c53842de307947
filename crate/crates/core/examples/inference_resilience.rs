//! Ciphertext counts for reference model sizes and the chance of matching
//! shuffled ciphers back to their owners.

use chainfl::harness::{inference_success_log10, inference_success_probability};
use ckks::cipher_count;

fn main() {
    for (name, params) in [("small CNN", 23_000), ("larger CNN", 29_000), ("VGG-like", 234_000), ("ResNet-like", 20_600_000)] {
        println!("{name:<12} {params:>10} params -> {:>6} ciphertexts at N=4096", cipher_count(params, 4096));
    }
    println!();
    for m in [1, 2, 5, 12, 15, 50, 115] {
        println!(
            "m = {m:>3}: P = {:.3e} (log10 {:.2})",
            inference_success_probability(m),
            inference_success_log10(m) + 0.0
        );
    }
}
