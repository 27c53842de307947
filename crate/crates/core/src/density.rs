//! One-dimensional Gaussian kernel density estimation and valley splitting.

use thiserror::Error;

/// Grid resolution used by the poisoning defense.
pub const DEFAULT_RESOLUTION: usize = 2000;

const MIN_BANDWIDTH: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("no scores")]
    Empty,
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error("resolution must be at least 3, got {0}")]
    Resolution(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
    samples: Vec<f64>,
}

impl KdeCurve {
    /// Density at an arbitrary point.
    pub fn density_at(&self, x: f64) -> f64 {
        kde_value(&self.samples, self.bandwidth, x)
    }

    /// Trapezoidal integral of the density over `[lo, hi]` with `steps` intervals.
    pub fn mass(&self, lo: f64, hi: f64, steps: usize) -> f64 {
        let dx = (hi - lo) / steps as f64;
        let mut total = 0.5 * (self.density_at(lo) + self.density_at(hi));
        for i in 1..steps {
            total += self.density_at(lo + i as f64 * dx);
        }
        total * dx
    }

    /// Trapezoidal integral over the evaluation grid only.
    pub fn grid_mass(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum()
    }
}

fn kde_value(samples: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    samples
        .iter()
        .map(|c| {
            let u = (x - c) / h;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
        * norm
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule `0.9 · min(σ̂, IQR/1.34) · K^(-1/5)`, floored at 1e-6.
///
/// A zero IQR (more than half the scores tied) falls back to σ̂ alone.
pub fn silverman_bandwidth(scores: &[f64]) -> f64 {
    let k = scores.len();
    if k < 2 {
        return MIN_BANDWIDTH;
    }
    let mean = scores.iter().sum::<f64>() / k as f64;
    let var = scores.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let sd = var.sqrt();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * (k as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Evaluates the Gaussian KDE of `scores` on `resolution` evenly spaced
/// points from `min(scores)` to `max(scores)` inclusive.
///
/// When all scores coincide the grid is widened to four bandwidths on each
/// side so the curve still has a visible peak.
pub fn gaussian_kde(scores: &[f64], resolution: usize) -> Result<KdeCurve, DensityError> {
    if scores.is_empty() {
        return Err(DensityError::Empty);
    }
    if let Some(&bad) = scores.iter().find(|c| !c.is_finite()) {
        return Err(DensityError::NonFinite(bad));
    }
    if resolution < 3 {
        return Err(DensityError::Resolution(resolution));
    }
    let h = silverman_bandwidth(scores);
    let mut lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 4.0 * h;
        hi += 4.0 * h;
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    let xs: Vec<f64> = (0..resolution)
        .map(|i| if i == resolution - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let ys = xs.iter().map(|&x| kde_value(scores, h, x)).collect();
    Ok(KdeCurve {
        xs,
        ys,
        bandwidth: h,
        samples: scores.to_vec(),
    })
}

/// Indices of interior local minima, ascending.
///
/// A flat run of equal values counts once (at its first index) when both
/// neighbours of the run are strictly higher, so a valley that falls exactly
/// between two grid points is not lost.
pub fn local_minima(ys: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if ys.len() < 3 {
        return out;
    }
    let mut i = 1;
    while i < ys.len() - 1 {
        if ys[i] < ys[i - 1] {
            let mut j = i;
            while j + 1 < ys.len() && ys[j + 1] == ys[i] {
                j += 1;
            }
            if j + 1 < ys.len() && ys[j + 1] > ys[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Splits scores into `minima_xs.len() + 1` groups of indices into `scores`.
///
/// Group `m` holds scores in `(b_{m-1}, b_m]`; a score equal to a boundary
/// joins the lower group. Groups keep input order and may be empty.
pub fn assign_groups(scores: &[f64], minima_xs: &[f64]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); minima_xs.len() + 1];
    for (i, &c) in scores.iter().enumerate() {
        let g = minima_xs.iter().take_while(|&&b| c > b).count();
        groups[g].push(i);
    }
    groups
}

/// Full defense split: KDE, valley detection and grouping.
///
/// Returns index groups over `scores`, leftmost (smallest scores) first.
pub fn split_scores(scores: &[f64], resolution: usize) -> Result<Vec<Vec<usize>>, DensityError> {
    if scores.is_empty() {
        return Err(DensityError::Empty);
    }
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(vec![(0..scores.len()).collect()]);
    }
    let curve = gaussian_kde(scores, resolution)?;
    let minima: Vec<f64> = local_minima(&curve.ys).into_iter().map(|i| curve.xs[i]).collect();
    Ok(assign_groups(scores, &minima))
}
