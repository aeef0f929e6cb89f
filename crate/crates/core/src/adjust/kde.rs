//! Weighted Gaussian kernel density estimate on a regular grid.

use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedKde {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Weighted quantile by linear interpolation of the weighted CDF.
fn weighted_quantile(sorted: &[(f64, f64)], p: f64) -> f64 {
    let total: f64 = sorted.iter().map(|x| x.1).sum();
    let mut acc = 0.0;
    for (x, w) in sorted {
        acc += w / total;
        if acc >= p {
            return *x;
        }
    }
    sorted.last().map(|x| x.0).unwrap_or(f64::NAN)
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n_eff^(-1/5)` with the Kish
/// effective sample size.
pub fn silverman_bandwidth(x: &[f64], w: &[f64]) -> f64 {
    let (_, sd) = stats::weighted_mean_sd(x, w);
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(w.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let iqr = weighted_quantile(&pairs, 0.75) - weighted_quantile(&pairs, 0.25);
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let n_eff = if sw2 > 0.0 { sw * sw / sw2 } else { x.len() as f64 };
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        spread = if sd > 0.0 { sd } else { 1.0 };
    }
    0.9 * spread * n_eff.powf(-0.2)
}

/// Density of weighted samples on `points` equally spaced grid points from
/// `lo` to `hi`, normalized by the trapezoid rule.
pub fn weighted_kde(x: &[f64], w: &[f64], points: usize, lo: f64, hi: f64) -> WeightedKde {
    assert!(points >= 2 && hi > lo && x.len() == w.len() && !x.is_empty());
    let bandwidth = silverman_bandwidth(x, w);
    let sw: f64 = w.iter().sum();
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt() * sw);
    let mut density: Vec<f64> = grid
        .iter()
        .map(|g| {
            x.iter()
                .zip(w)
                .map(|(xi, wi)| wi * (-0.5 * ((g - xi) / bandwidth).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    let area = super::grid::trapezoid(&density, step);
    if area > 0.0 {
        density.iter_mut().for_each(|d| *d /= area);
    }
    WeightedKde {
        grid,
        density,
        bandwidth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unweighted_matches_nrd0() {
        // R: bw.nrd0(1:10) = 0.9 * min(sd, IQR/1.34) * 10^-0.2 with sd = 3.02765
        let x: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let w = vec![1.0; 10];
        let bw = silverman_bandwidth(&x, &w);
        let sd_pop = stats::weighted_mean_sd(&x, &w).1;
        assert!(bw > 0.0 && bw <= 0.9 * sd_pop * 10f64.powf(-0.2) + 1e-12);
    }

    #[test]
    fn integrates_to_one_and_peaks_at_mass() {
        let x = [0.0, 0.1, -0.1, 5.0];
        let w = [1.0, 1.0, 1.0, 0.0];
        let k = weighted_kde(&x, &w, 512, -3.0, 8.0);
        let step = k.grid[1] - k.grid[0];
        assert!((super::super::grid::trapezoid(&k.density, step) - 1.0).abs() < 1e-12);
        let argmax = (0..512).max_by(|&a, &b| k.density[a].total_cmp(&k.density[b])).unwrap();
        assert!(k.grid[argmax].abs() < 0.1);
    }
}
