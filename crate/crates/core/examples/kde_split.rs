//! Splitting distance scores at the valleys of a Gaussian KDE.

use chainfl::density::{gaussian_kde, local_minima, split_scores, DEFAULT_RESOLUTION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = [0.10, 0.11, 0.12, 0.90, 0.91];
    let curve = gaussian_kde(&scores, DEFAULT_RESOLUTION)?;
    let valleys: Vec<f64> = local_minima(&curve.ys).into_iter().map(|i| curve.xs[i]).collect();
    println!("bandwidth {:.4}, valleys at {valleys:.4?}", curve.bandwidth);

    let groups = split_scores(&scores, DEFAULT_RESOLUTION)?;
    for (k, g) in groups.iter().enumerate() {
        let label = if k == 0 { "benign" } else { "malicious" };
        let members: Vec<f64> = g.iter().map(|&i| scores[i]).collect();
        println!("group {k} ({label}): {members:?}");
    }
    Ok(())
}
