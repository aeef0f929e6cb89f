//! Local-linear regression adjustment with Epanechnikov weights, and its
//! ridge-regularized variant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rejection::RetainedSet;

/// Regression-adjusted retained parameters.
#[derive(Debug, Clone)]
pub struct AdjustedSample {
    pub param_names: Vec<String>,
    /// One row per retained simulation.
    pub adjusted: DMatrix<f64>,
    pub unadjusted: DMatrix<f64>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
    /// Regression slopes, statistics × parameters.
    pub slopes: DMatrix<f64>,
}

/// Epanechnikov weights `1 - (d/eps)^2`, normalized. All-zero distances
/// give equal weights.
pub fn epanechnikov_weights(distances: &[f64], epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = if epsilon > 0.0 {
        distances
            .iter()
            .map(|d| (1.0 - (d / epsilon).powi(2)).max(0.0))
            .collect()
    } else {
        vec![1.0; distances.len()]
    };
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / distances.len() as f64; distances.len()]
    }
}

pub fn loclinear_adjust(retained: &RetainedSet) -> Result<AdjustedSample> {
    adjust(retained, None)
}

/// As [`loclinear_adjust`] with `lambda` added to the slope part of the
/// normal equations.
pub fn ridge_adjust(retained: &RetainedSet, lambda: f64) -> Result<AdjustedSample> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    adjust(retained, Some(lambda))
}

fn adjust(retained: &RetainedSet, ridge: Option<f64>) -> Result<AdjustedSample> {
    let n = retained.len();
    let k = retained.stats.ncols();
    let p = retained.params.ncols();
    if n <= k + 1 {
        return Err(Error::invalid(format!(
            "regression needs more than {} retained simulations, got {n}",
            k + 1
        )));
    }
    let weights = epanechnikov_weights(&retained.distances, retained.epsilon);
    let offsets = DMatrix::from_fn(n, k, |i, j| retained.stats[(i, j)] - retained.obs[j]);

    // Regressors without any variation carry no information and get slope 0.
    let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
    let active: Vec<usize> = (0..k)
        .filter(|&j| (0..n).any(|i| weights[i] > 0.0 && offsets[(i, j)] != offsets[(first, j)]))
        .collect();
    let q = active.len();
    let design = DMatrix::from_fn(n, q + 1, |i, j| if j == 0 { 1.0 } else { offsets[(i, active[j - 1])] });

    let mut xtwx = DMatrix::zeros(q + 1, q + 1);
    let mut xtwy = DMatrix::zeros(q + 1, p);
    for i in 0..n {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        for a in 0..=q {
            let xa = design[(i, a)] * w;
            for b in 0..=q {
                xtwx[(a, b)] += xa * design[(i, b)];
            }
            for c in 0..p {
                xtwy[(a, c)] += xa * retained.params[(i, c)];
            }
        }
    }
    if let Some(lambda) = ridge {
        for a in 1..=q {
            xtwx[(a, a)] += lambda;
        }
    } else {
        check_conditioning(&xtwx)?;
    }
    let coef = solve_spd(xtwx, &xtwy)?;
    let mut slopes = DMatrix::zeros(k, p);
    for (a, &j) in active.iter().enumerate() {
        for c in 0..p {
            slopes[(j, c)] = coef[(a + 1, c)];
        }
    }
    let shift = &offsets * &slopes;
    let adjusted = &retained.params - shift;
    Ok(AdjustedSample {
        param_names: retained.param_names.clone(),
        adjusted,
        unadjusted: retained.params.clone(),
        weights,
        slopes,
    })
}

fn check_conditioning(m: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > max * 1e-12) {
        return Err(Error::Collinear(format!(
            "reciprocal condition number {:.3e}",
            (min / max).max(0.0)
        )));
    }
    Ok(())
}

/// Solves `a x = b` for symmetric positive definite `a`, falling back to
/// LU when Cholesky fails.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Collinear("normal equations are singular".into()))
}

impl AdjustedSample {
    /// Weighted mean and SD of an adjusted parameter.
    pub fn weighted_mean_sd(&self, param: usize) -> (f64, f64) {
        let x: Vec<f64> = self.adjusted.column(param).iter().copied().collect();
        crate::stats::weighted_mean_sd(&x, &self.weights)
    }

    pub fn column(&self, param: usize) -> DVector<f64> {
        self.adjusted.column(param).into_owned()
    }
}
