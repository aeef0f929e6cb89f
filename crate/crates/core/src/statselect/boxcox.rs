//! Box-Cox normalization of a single statistic.
//!
//! A value `x` is first mapped to `x' = 1 + (x - min) / (max - min)`, then
//! transformed with the geometric-mean scaled Box-Cox
//! `(x'^λ - 1) / (λ GM^(λ-1))` (or `GM ln x'` at λ = 0) and finally
//! centered and scaled by `mean` and `sd`.

use crate::error::{Error, Result};
use crate::stats;

/// λ candidates are `-2, -1.9, ..., 2`.
pub const LAMBDA_GRID_STEPS: usize = 40;
const LAMBDA_SNAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCox {
    pub max: f64,
    pub min: f64,
    pub lambda: f64,
    /// Geometric mean of the shifted training values.
    pub gm: f64,
    pub mean: f64,
    pub sd: f64,
}

impl BoxCox {
    /// λ = 1 and no centering: an affine map onto [0, 1] over `[min, max]`.
    pub fn identity(min: f64, max: f64) -> Self {
        Self {
            max,
            min,
            lambda: 1.0,
            gm: 1.0,
            mean: 0.0,
            sd: 1.0,
        }
    }

    fn shifted(&self, x: f64) -> f64 {
        1.0 + (x - self.min) / (self.max - self.min)
    }

    fn raw(&self, xs: f64) -> f64 {
        raw_transform(xs, self.lambda, self.gm)
    }

    /// `None` when `x` lies outside the transform's domain.
    pub fn try_apply(&self, x: f64) -> Option<f64> {
        let xs = self.shifted(x);
        if !(xs > 0.0) || !xs.is_finite() {
            return None;
        }
        let v = (self.raw(xs) - self.mean) / self.sd;
        v.is_finite().then_some(v)
    }
}

fn raw_transform(xs: f64, lambda: f64, gm: f64) -> f64 {
    if lambda == 0.0 {
        gm * xs.ln()
    } else {
        (xs.powf(lambda) - 1.0) / (lambda * gm.powf(lambda - 1.0))
    }
}

/// Fits λ by maximizing the normal profile log-likelihood on a grid over
/// [-2, 2]; the bounds are the observed min and max.
pub fn fit_boxcox(values: &[f64]) -> Result<BoxCox> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || !(max > min) {
        return Err(Error::invalid("cannot fit Box-Cox to a constant statistic"));
    }
    let shifted: Vec<f64> = values.iter().map(|&x| 1.0 + (x - min) / (max - min)).collect();
    let gm = (shifted.iter().map(|v| v.ln()).sum::<f64>() / shifted.len() as f64).exp();
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..=LAMBDA_GRID_STEPS {
        let mut lambda = (i as f64 - LAMBDA_GRID_STEPS as f64 / 2.0) / 10.0;
        if lambda.abs() < LAMBDA_SNAP {
            lambda = 0.0;
        }
        let t: Vec<f64> = shifted.iter().map(|&x| raw_transform(x, lambda, gm)).collect();
        // With the GM scaling the profile likelihood is -n/2 ln(var).
        let var = stats::variance(&t);
        if var < best.0 {
            best = (var, lambda);
        }
    }
    let lambda = best.1;
    let t: Vec<f64> = shifted.iter().map(|&x| raw_transform(x, lambda, gm)).collect();
    let sd = stats::sd(&t);
    if !(sd > 0.0) {
        return Err(Error::invalid("statistic is constant after the Box-Cox transform"));
    }
    Ok(BoxCox {
        max,
        min,
        lambda,
        gm,
        mean: stats::mean(&t),
        sd,
    })
}
