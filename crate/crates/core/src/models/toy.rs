//! Normal and uniform toy models summarized by eight sample statistics.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::stats;

pub const TOY_STAT_NAMES: [&str; 8] = ["mean", "var", "median", "min", "max", "range", "Q1", "Q3"];

/// mean, var (n − 1), median, min, max, range, Q1, Q3 (type-7 quartiles).
pub fn toy_stats(sample: &[f64]) -> [f64; 8] {
    let s = stats::sorted(sample);
    let n = s.len();
    assert!(n > 0, "empty sample");
    let (min, max) = (s[0], s[n - 1]);
    [
        stats::mean(&s),
        stats::variance(&s),
        stats::quantile_sorted(&s, 0.5),
        min,
        max,
        max - min,
        stats::quantile_sorted(&s, 0.25),
        stats::quantile_sorted(&s, 0.75),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyModel {
    Normal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    pub mu: f64,
    pub sigma2: f64,
    pub sample_size: usize,
}

impl ToyParams {
    pub fn new(mu: f64, sigma2: f64) -> Self {
        Self {
            mu,
            sigma2,
            sample_size: 100,
        }
    }
}

/// Bounds of the uniform distribution with mean `mu` and variance `sigma2`.
pub fn uniform_bounds(mu: f64, sigma2: f64) -> (f64, f64) {
    let h = (3.0 * sigma2).sqrt();
    (mu - h, mu + h)
}

/// Draws one data set and returns its statistics.
pub fn sample_toy<R: Rng + ?Sized>(model: ToyModel, p: ToyParams, rng: &mut R) -> Result<Vec<f64>> {
    if !(p.sigma2 > 0.0) || !p.mu.is_finite() {
        return Err(Error::invalid(format!(
            "toy model needs finite mu and sigma2 > 0, got ({}, {})",
            p.mu, p.sigma2
        )));
    }
    Ok(match model {
        ToyModel::Normal => {
            let d = Normal::new(p.mu, p.sigma2.sqrt()).expect("sd > 0");
            (0..p.sample_size).map(|_| d.sample(rng)).collect()
        }
        ToyModel::Uniform => {
            let (a, b) = uniform_bounds(p.mu, p.sigma2);
            let d = Uniform::new(a, b).expect("a < b");
            (0..p.sample_size).map(|_| d.sample(rng)).collect()
        }
    })
}

pub fn simulate_toy<R: Rng + ?Sized>(model: ToyModel, p: ToyParams, rng: &mut R) -> Result<[f64; 8]> {
    if p.sample_size < 4 {
        return Err(Error::invalid("toy sample size must be at least 4"));
    }
    Ok(toy_stats(&sample_toy(model, p, rng)?))
}

/// Observed statistics of the test data set.
pub const TOY_OBSERVED: [f64; 8] = [0.102, 1.14, 0.0788, -2.02, 3.16, 5.18, -0.598, 0.799];

pub fn toy_observed() -> crate::io::ObservedStats {
    crate::io::ObservedStats::new(
        TOY_STAT_NAMES.iter().map(|s| s.to_string()).collect(),
        TOY_OBSERVED.to_vec(),
    )
    .expect("eight distinct names")
}

/// `n` simulations with `mu ~ U[-1, 1]` and `sigma2 ~ U[0.1, 4]`; columns
/// `mu sigma2` followed by the eight statistics.
pub fn toy_table<R: Rng + ?Sized>(model: ToyModel, n: usize, rng: &mut R) -> crate::io::SimulationTable {
    let mut data = Vec::with_capacity(n * 10);
    for _ in 0..n {
        let mu = rng.random_range(-1.0..1.0);
        let sigma2 = rng.random_range(0.1..4.0);
        data.push(mu);
        data.push(sigma2);
        data.extend(simulate_toy(model, ToyParams::new(mu, sigma2), rng).expect("valid prior draw"));
    }
    let names = ["mu", "sigma2"]
        .iter()
        .chain(TOY_STAT_NAMES.iter())
        .map(|s| s.to_string())
        .collect();
    crate::io::SimulationTable::from_flat(names, data, vec![0, 1]).expect("finite statistics")
}
