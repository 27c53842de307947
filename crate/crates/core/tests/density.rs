use chainfl::density::*;
use proptest::prelude::*;

// Independent Silverman bandwidth and density, straight from the textbook formulas.
fn reference_bandwidth(c: &[f64]) -> f64 {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = c.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1.0);
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
    };
    let iqr = q(0.75) - q(0.25);
    0.9 * sd.min(iqr / 1.34) * n.powf(-0.2)
}

fn reference_density(c: &[f64], h: f64, x: f64) -> f64 {
    c.iter()
        .map(|ci| (-(x - ci).powi(2) / (2.0 * h * h)).exp())
        .sum::<f64>()
        / (c.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt())
}

#[test]
fn valley_matches_fine_search() {
    let scores = [0.1, 0.12, 0.15, 0.8, 0.85, 0.9];
    let h = reference_bandwidth(&scores);
    let curve = gaussian_kde(&scores, DEFAULT_RESOLUTION).unwrap();
    assert!((curve.bandwidth - h).abs() < 1e-12);

    // brute-force the density minimum between the two clusters
    let steps = 200_000;
    let (mut best_x, mut best_y) = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let x = 0.15 + (0.8 - 0.15) * i as f64 / steps as f64;
        let y = reference_density(&scores, h, x);
        if y < best_y {
            best_x = x;
            best_y = y;
        }
    }
    let minima = local_minima(&curve.ys);
    assert_eq!(minima.len(), 1);
    let step = 0.8 / (DEFAULT_RESOLUTION - 1) as f64;
    assert!((curve.xs[minima[0]] - best_x).abs() <= step, "{} vs {best_x}", curve.xs[minima[0]]);

    let groups = split_scores(&scores, DEFAULT_RESOLUTION).unwrap();
    assert_eq!(groups, vec![vec![0, 1, 2], vec![3, 4, 5]]);
}

#[test]
fn grid_spans_the_scores() {
    let curve = gaussian_kde(&[0.3, 0.1, 0.7], 2000).unwrap();
    assert_eq!(curve.xs.len(), 2000);
    assert_eq!(curve.xs[0], 0.1);
    assert_eq!(curve.xs[1999], 0.7);
}

#[test]
fn degenerate_inputs() {
    assert_eq!(split_scores(&[], 2000), Err(DensityError::Empty));
    assert_eq!(split_scores(&[0.4], 2000).unwrap(), vec![vec![0]]);
    assert_eq!(split_scores(&[0.2, 0.2, 0.2], 2000).unwrap(), vec![vec![0, 1, 2]]);
    assert!(matches!(gaussian_kde(&[0.1, f64::NAN], 2000), Err(DensityError::NonFinite(_))));
    assert_eq!(gaussian_kde(&[0.1, 0.2], 2), Err(DensityError::Resolution(2)));
}

#[test]
fn boundary_ties_go_low() {
    assert_eq!(assign_groups(&[0.1, 0.5, 0.6], &[0.5]), vec![vec![0, 1], vec![2]]);
    assert_eq!(assign_groups(&[0.9], &[0.2, 0.4]), vec![vec![], vec![], vec![0]]);
}

fn clustered() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0usize..3, -0.05f64..0.05), 2..30)
        .prop_map(|v| v.into_iter().map(|(c, e)| 0.1 + 0.35 * c as f64 + e).collect())
}

fn canonical(groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

proptest! {
    #[test]
    fn groups_partition_the_input(scores in clustered()) {
        let groups = split_scores(&scores, 500).unwrap();
        let mut all: Vec<usize> = groups.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..scores.len()).collect::<Vec<_>>());
        // groups are ordered by score
        for w in groups.iter().filter(|g| !g.is_empty()).collect::<Vec<_>>().windows(2) {
            let hi = w[0].iter().map(|&i| scores[i]).fold(f64::MIN, f64::max);
            let lo = w[1].iter().map(|&i| scores[i]).fold(f64::MAX, f64::min);
            prop_assert!(hi < lo);
        }
    }

    #[test]
    fn split_ignores_affine_rescaling(scores in clustered(), a in 0.5f64..4.0, b in -1.0f64..1.0) {
        let moved: Vec<f64> = scores.iter().map(|c| a * c + b).collect();
        prop_assert_eq!(
            canonical(split_scores(&scores, 500).unwrap()),
            canonical(split_scores(&moved, 500).unwrap())
        );
    }

    #[test]
    fn split_ignores_input_order(scores in clustered()) {
        let mut rev = scores.clone();
        rev.reverse();
        let n = scores.len();
        let back: Vec<Vec<usize>> = split_scores(&rev, 500)
            .unwrap()
            .into_iter()
            .map(|g| {
                let mut g: Vec<usize> = g.into_iter().map(|i| n - 1 - i).collect();
                g.sort_unstable();
                g
            })
            .collect();
        prop_assert_eq!(canonical(split_scores(&scores, 500).unwrap()), canonical(back));
    }

    #[test]
    fn density_integrates_to_one(scores in clustered()) {
        let curve = gaussian_kde(&scores, 500).unwrap();
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min) - 8.0 * curve.bandwidth;
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 8.0 * curve.bandwidth;
        let m = curve.mass(lo, hi, 20_000);
        prop_assert!((m - 1.0).abs() < 1e-3, "mass {}", m);
        prop_assert!(curve.grid_mass() <= m + 1e-9);
    }
}
