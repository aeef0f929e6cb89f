//! ABC-GLM: a local linear Gaussian model of statistics given parameters,
//! combined with a Gaussian-mixture representation of the truncated prior.
//!
//! Parameters are mapped to [0, 1] with a [`ParamScale`] before fitting;
//! statistics are used on the standardized scale of the retained set.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ParamScale;
use super::grid::{GridPosterior, JointGrid, linspace};
use crate::error::{Error, Result};
use crate::rejection::RetainedSet;

/// Added to the diagonal of the residual covariance.
pub const RIDGE_FLOOR: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `S = c + B theta + e`, `e ~ N(0, Sigma)`, theta on the unit scale.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub scale: ParamScale,
    pub stat_names: Vec<String>,
    /// Intercept, one entry per statistic.
    pub c: DVector<f64>,
    /// Statistics × parameters.
    pub b: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

/// Ordinary least squares of the retained standardized statistics on the
/// unit-scaled retained parameters.
pub fn glm_fit(retained: &RetainedSet, scale: &ParamScale) -> Result<GlmFit> {
    let n = retained.len();
    let p = retained.params.ncols();
    let k = retained.stats.ncols();
    if scale.len() != p {
        return Err(Error::invalid("parameter scale does not match the retained set"));
    }
    if n <= p + 1 {
        return Err(Error::invalid(format!(
            "GLM needs more than {} retained simulations, got {n}",
            p + 1
        )));
    }
    let x = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            scale.to_unit(j - 1, retained.params[(i, j - 1)])
        }
    });
    let xtx = x.transpose() * &x;
    let eig = SymmetricEigen::new(xtx.clone());
    let emax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let emin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(emin > emax * 1e-12) {
        return Err(Error::Numerical(
            "retained parameters are rank deficient; the GLM cannot be fitted".into(),
        ));
    }
    let xty = x.transpose() * &retained.stats;
    let coef = xtx
        .cholesky()
        .ok_or_else(|| Error::Numerical("GLM normal equations are not positive definite".into()))?
        .solve(&xty);
    let resid = &retained.stats - &x * &coef;
    let mut sigma = resid.transpose() * &resid / (n - p - 1) as f64;
    for i in 0..k {
        sigma[(i, i)] += RIDGE_FLOOR;
    }
    sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(GlmFit {
        scale: scale.clone(),
        stat_names: retained.stat_names.clone(),
        c: coef.row(0).transpose(),
        b: coef.rows(1, p).transpose(),
        sigma,
    })
}

fn chol(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    m.cholesky()
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

fn ln_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// The GLM combined with the prior mixture, ready to evaluate posteriors and
/// marginal densities for any observation on the standardized scale.
#[derive(Debug, Clone)]
pub struct GlmPosterior {
    pub fit: GlmFit,
    /// Retained parameters on the unit scale (rows).
    theta: DMatrix<f64>,
    /// Squared mixture bandwidth per parameter.
    pub h2: Vec<f64>,
    /// Log mass of each prior component inside the unit box.
    ln_box_mass: Vec<f64>,
    /// Predicted statistics `c + B theta_j` as columns.
    predicted: DMatrix<f64>,
    d_chol: Cholesky<f64, Dyn>,
    d_ln_det: f64,
    /// `(H^-1 + B' Sigma^-1 B)^-1`.
    pub t: DMatrix<f64>,
    t_hinv: DMatrix<f64>,
    t_bt_sinv: DMatrix<f64>,
    grid_lo: Vec<f64>,
    grid_hi: Vec<f64>,
}

impl GlmPosterior {
    /// `dirac_peak_width` is the mixture bandwidth as a fraction of each
    /// parameter's full range (the unit scale).
    pub fn new(fit: GlmFit, retained: &RetainedSet, dirac_peak_width: f64) -> Result<Self> {
        if !(dirac_peak_width > 0.0) {
            return Err(Error::invalid("diracPeakWidth must be positive"));
        }
        let n = retained.len();
        let p = fit.b.ncols();
        let k = fit.b.nrows();
        let theta = DMatrix::from_fn(n, p, |i, j| fit.scale.to_unit(j, retained.params[(i, j)]));
        let mut h2 = Vec::with_capacity(p);
        let mut grid_lo = Vec::with_capacity(p);
        let mut grid_hi = Vec::with_capacity(p);
        for j in 0..p {
            let col = theta.column(j);
            let lo = col.min();
            let hi = col.max();
            let range = hi - lo;
            let width = if range > 0.0 { range } else { 1.0 };
            h2.push(dirac_peak_width.powi(2));
            let pad = 0.1 * width;
            grid_lo.push((lo - pad).max(0.0));
            grid_hi.push((hi + pad).min(1.0));
        }
        let h = DMatrix::from_diagonal(&DVector::from_vec(h2.clone()));
        let d = &fit.sigma + &fit.b * &h * fit.b.transpose();
        let d_chol = chol((&d + d.transpose()) * 0.5, "GLM marginal covariance")?;
        let d_ln_det = ln_det(&d_chol);
        let s_chol = chol(fit.sigma.clone(), "GLM residual covariance")?;
        let sinv_b = s_chol.solve(&fit.b);
        let bt_sinv = sinv_b.transpose();
        let hinv = DMatrix::from_diagonal(&DVector::from_iterator(p, h2.iter().map(|v| 1.0 / v)));
        let prec = &hinv + fit.b.transpose() * &sinv_b;
        let t = chol((&prec + prec.transpose()) * 0.5, "GLM posterior precision")?.inverse();
        let t_hinv = &t * &hinv;
        let t_bt_sinv = &t * &bt_sinv;
        let mut predicted = &fit.b * theta.transpose();
        for mut col in predicted.column_iter_mut() {
            col += &fit.c;
        }
        debug_assert_eq!(predicted.nrows(), k);
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let ln_box_mass = theta
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(&h2)
                    .map(|(&x, &v)| {
                        let h = v.sqrt();
                        (normal.cdf((1.0 - x) / h) - normal.cdf(-x / h)).max(1e-300).ln()
                    })
                    .sum()
            })
            .collect();
        Ok(Self {
            fit,
            theta,
            h2,
            ln_box_mass,
            predicted,
            d_chol,
            d_ln_det,
            t,
            t_hinv,
            t_bt_sinv,
            grid_lo,
            grid_hi,
        })
    }

    pub fn num_components(&self) -> usize {
        self.theta.nrows()
    }

    /// `ln N(s; c + B theta_j, D)` for every component.
    fn component_log_likelihoods(&self, s: &DVector<f64>) -> Vec<f64> {
        let k = s.len();
        let mut resid = -self.predicted.clone();
        for mut col in resid.column_iter_mut() {
            col += s;
        }
        let z = self
            .d_chol
            .l_dirty()
            .solve_lower_triangular(&resid)
            .expect("Cholesky factor is invertible");
        let constant = -0.5 * (self.d_ln_det + k as f64 * LN_2PI);
        z.column_iter()
            .map(|c| constant - 0.5 * c.norm_squared())
            .collect()
    }

    /// Log of the mixture-averaged likelihood at `s`.
    pub fn log_marginal_density(&self, s: &DVector<f64>) -> f64 {
        let ll = self.component_log_likelihoods(s);
        log_sum_exp(&ll) - (ll.len() as f64).ln()
    }

    pub fn marginal_density(&self, s: &DVector<f64>) -> f64 {
        self.log_marginal_density(s).exp()
    }

    /// Normalized component weights and posterior component means (rows,
    /// unit scale). Prior components are truncated to the unit box.
    pub fn components(&self, s: &DVector<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let mut ll = self.component_log_likelihoods(s);
        for (v, z) in ll.iter_mut().zip(&self.ln_box_mass) {
            *v -= z;
        }
        let lse = log_sum_exp(&ll);
        let w: Vec<f64> = ll.iter().map(|v| (v - lse).exp()).collect();
        let shift = &self.t_bt_sinv * (s - &self.fit.c);
        let mut means = &self.theta * self.t_hinv.transpose();
        for mut row in means.row_iter_mut() {
            row += shift.transpose();
        }
        (w, means)
    }

    /// Marginal posterior of parameter `j` on `points` grid points, on the
    /// original parameter scale.
    pub fn marginal(&self, s: &DVector<f64>, j: usize, points: usize) -> GridPosterior {
        let (w, means) = self.components(s);
        self.marginal_from(&w, &means, j, points)
    }

    pub fn marginals(&self, s: &DVector<f64>, points: usize) -> Vec<GridPosterior> {
        let (w, means) = self.components(s);
        (0..self.theta.ncols())
            .map(|j| self.marginal_from(&w, &means, j, points))
            .collect()
    }

    fn marginal_from(&self, w: &[f64], means: &DMatrix<f64>, j: usize, points: usize) -> GridPosterior {
        let sd = self.t[(j, j)].sqrt();
        let unit = linspace(self.grid_lo[j], self.grid_hi[j], points.max(2));
        let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-300).collect();
        let density = unit
            .iter()
            .map(|&x| {
                active
                    .iter()
                    .map(|&i| {
                        let z = (x - means[(i, j)]) / sd;
                        w[i] * (-0.5 * z * z).exp()
                    })
                    .sum::<f64>()
            })
            .collect();
        let grid = unit.iter().map(|&u| self.fit.scale.from_unit(j, u)).collect();
        GridPosterior::new(self.fit.scale.names[j].clone(), grid, density)
    }

    /// Joint posterior of 2 to 4 parameters on a tensor grid of `points` per
    /// axis, original scale.
    pub fn joint(&self, s: &DVector<f64>, params: &[usize], points: usize) -> Result<JointGrid> {
        let q = params.len();
        if !(2..=4).contains(&q) {
            return Err(Error::invalid(format!(
                "joint posteriors need 2 to 4 parameters, got {q}"
            )));
        }
        let p = self.theta.ncols();
        if let Some(bad) = params.iter().find(|&&j| j >= p) {
            return Err(Error::invalid(format!("no parameter with index {}", bad + 1)));
        }
        let total = (points as u128).pow(q as u32);
        if total > 50_000_000 {
            return Err(Error::invalid(format!(
                "joint grid of {total} points is too large; reduce jointPosteriorDensityPoints"
            )));
        }
        let (w, means) = self.components(s);
        let sub = DMatrix::from_fn(q, q, |a, b| self.t[(params[a], params[b])]);
        let sub_chol = chol(sub, "joint posterior covariance")?;
        let linv = sub_chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("joint covariance factor is singular".into()))?;
        let unit_axes: Vec<Vec<f64>> = params
            .iter()
            .map(|&j| linspace(self.grid_lo[j], self.grid_hi[j], points.max(2)))
            .collect();
        let active: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-300).collect();
        let n = unit_axes.iter().map(Vec::len).product::<usize>();
        let mut density = vec![0.0; n];
        let mut x = vec![0.0; q];
        let mut diff = DVector::<f64>::zeros(q);
        for (flat, d) in density.iter_mut().enumerate() {
            let mut rem = flat;
            for a in (0..q).rev() {
                let len = unit_axes[a].len();
                x[a] = unit_axes[a][rem % len];
                rem /= len;
            }
            let mut acc = 0.0;
            for &i in &active {
                for a in 0..q {
                    diff[a] = x[a] - means[(i, params[a])];
                }
                let z = &linv * &diff;
                acc += w[i] * (-0.5 * z.norm_squared()).exp();
            }
            *d = acc;
        }
        let axes = params
            .iter()
            .zip(&unit_axes)
            .map(|(&j, ax)| ax.iter().map(|&u| self.fit.scale.from_unit(j, u)).collect())
            .collect();
        let names = params.iter().map(|&j| self.fit.scale.names[j].clone()).collect();
        Ok(JointGrid::new(names, axes, density))
    }
}

/// Mixture-averaged likelihood of the retained set's observation.
pub fn glm_marginal_density(
    fit: &GlmFit,
    retained: &RetainedSet,
    dirac_peak_width: f64,
) -> Result<f64> {
    let post = GlmPosterior::new(fit.clone(), retained, dirac_peak_width)?;
    Ok(post.marginal_density(&retained.obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjust::regression::tests::retained_from;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit_scale(p: usize) -> ParamScale {
        ParamScale::new(
            (0..p).map(|j| format!("p{j}")).collect(),
            vec![0.0; p],
            vec![1.0; p],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_linear_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = DMatrix::from_fn(50, 1, |_, _| rng.random_range(0.0..1.0));
        let stats = params.map(|t| 3.0 * t);
        let r = retained_from(stats, params, DVector::from_element(1, 1.5));
        let f = glm_fit(&r, &unit_scale(1)).unwrap();
        assert!((f.b[(0, 0)] - 3.0).abs() < 1e-9);
        assert!((f.sigma[(0, 0)] - RIDGE_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn independent_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = DMatrix::from_fn(5000, 1, |_, _| rng.random_range(0.0..1.0));
        let stats = DMatrix::from_fn(5000, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = retained_from(stats, params, DVector::zeros(2));
        let f = glm_fit(&r, &unit_scale(1)).unwrap();
        assert!(f.b.iter().all(|v| v.abs() < 0.15));
        assert!((f.sigma[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn flat_likelihood_returns_prior_mixture() {
        let params = DMatrix::from_fn(20, 1, |i, _| 0.2 + 0.03 * i as f64);
        let stats = DMatrix::from_fn(20, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let r = retained_from(stats, params, DVector::from_element(1, 0.0));
        let mut f = glm_fit(&r, &unit_scale(1)).unwrap();
        f.b.fill(0.0);
        let post = GlmPosterior::new(f, &r, 0.01).unwrap();
        let (w, means) = post.components(&r.obs);
        for (i, wi) in w.iter().enumerate() {
            assert!((wi - 0.05).abs() < 1e-12);
            assert!((means[(i, 0)] - r.params[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_component_density_is_gaussian() {
        let params = DMatrix::from_fn(4, 1, |i, _| i as f64 / 3.0);
        let stats = DMatrix::from_fn(4, 1, |i, _| [0.1, -0.2, 0.3, -0.1][i]);
        let r = retained_from(stats, params, DVector::from_element(1, 0.7));
        let mut f = glm_fit(&r, &unit_scale(1)).unwrap();
        f.b.fill(0.0);
        let var = f.sigma[(0, 0)];
        let c = f.c[0];
        let d = glm_marginal_density(&f, &r, 0.01).unwrap();
        let expect = (-(0.7 - c).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        assert!((d - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn joint_dimension_guard() {
        let params = DMatrix::from_fn(30, 2, |i, j| ((i * (j + 3)) % 7) as f64 / 7.0);
        let stats = DMatrix::from_fn(30, 2, |i, j| ((i * (j + 5)) % 11) as f64 / 11.0);
        let r = retained_from(stats, params, DVector::zeros(2));
        let f = glm_fit(&r, &unit_scale(2)).unwrap();
        let post = GlmPosterior::new(f, &r, 0.05).unwrap();
        assert!(post.joint(&r.obs, &[0], 10).is_err());
        assert!(post.joint(&r.obs, &[0, 1, 0, 1, 0], 10).is_err());
        let j = post.joint(&r.obs, &[0, 1], 20).unwrap();
        assert_eq!(j.len(), 400);
        assert!((j.cell_mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
