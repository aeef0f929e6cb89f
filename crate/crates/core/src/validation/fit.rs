//! Marginal-density and Tukey-depth P-values of an observation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::seq::index;
use rand_distr::StandardNormal;

use crate::adjust::GlmPosterior;
use crate::error::{Error, Result};
use crate::rejection::RetainedSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPValues {
    pub marginal_density: f64,
    pub marginal_density_p: f64,
    pub tukey_depth: f64,
    pub tukey_p: f64,
    pub n_check: usize,
}

fn check_subset<R: Rng + ?Sized>(n: usize, n_check: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_check == 0 || n_check > n {
        return Err(Error::invalid(format!(
            "cannot check {n_check} of {n} retained simulations"
        )));
    }
    let mut v = index::sample(rng, n, n_check).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Fraction of `n_check` random retained simulations whose marginal density
/// is at most that of the observation. Returns (density of obs, P).
pub fn marginal_density_pvalue<R: Rng + ?Sized>(
    post: &GlmPosterior,
    retained: &RetainedSet,
    n_check: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let check = check_subset(retained.len(), n_check, rng)?;
    let obs = post.log_marginal_density(&retained.obs);
    let below = check
        .iter()
        .filter(|&&i| post.log_marginal_density(&retained.stats.row(i).transpose()) <= obs)
        .count();
    Ok((obs.exp(), below as f64 / n_check as f64))
}

/// Half-space depth of query points relative to a point cloud, approximated
/// over random unit directions plus the whitened direction from the
/// centroid to each query.
#[derive(Debug, Clone)]
pub struct DepthIndex {
    points: DMatrix<f64>,
    directions: Vec<DVector<f64>>,
    sorted_projections: Vec<Vec<f64>>,
    centroid: DVector<f64>,
    whitener: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl DepthIndex {
    /// `points` holds one point per row.
    pub fn new<R: Rng + ?Sized>(points: &DMatrix<f64>, n_projections: usize, rng: &mut R) -> Self {
        let k = points.ncols();
        let n = points.nrows();
        let directions: Vec<DVector<f64>> = (0..n_projections)
            .map(|_| loop {
                let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm > 1e-12 {
                    break v / norm;
                }
            })
            .collect();
        let sorted_projections = directions
            .iter()
            .map(|u| {
                let mut p: Vec<f64> = (points * u).iter().copied().collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        let centroid = DVector::from_fn(k, |j, _| points.column(j).mean());
        let mut cov = DMatrix::zeros(k, k);
        for i in 0..n {
            let d = points.row(i).transpose() - &centroid;
            cov += &d * d.transpose();
        }
        cov /= (n.max(2) - 1) as f64;
        for j in 0..k {
            cov[(j, j)] += 1e-6;
        }
        Self {
            points: points.clone(),
            directions,
            sorted_projections,
            centroid,
            whitener: cov.cholesky(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Twice the smaller side count; points on the hyperplane count half
    /// to each side.
    fn count_sides(sorted: &[f64], v: f64) -> usize {
        let tol = 1e-10 * (1.0 + v.abs());
        let below = sorted.partition_point(|&p| p < v - tol);
        let below_or_equal = sorted.partition_point(|&p| p <= v + tol);
        let equal = below_or_equal - below;
        let above = sorted.len() - below_or_equal;
        (2 * below + equal).min(2 * above + equal)
    }

    /// Depth using only the first `m` random directions.
    pub fn depth_limited(&self, x: &DVector<f64>, m: usize) -> f64 {
        let n = self.len() as f64;
        let mut best = usize::MAX;
        for (u, sorted) in self.directions.iter().zip(&self.sorted_projections).take(m) {
            best = best.min(Self::count_sides(sorted, u.dot(x)));
            if best == 0 {
                return 0.0;
            }
        }
        if let Some(w) = &self.whitener {
            let dir = w.solve(&(x - &self.centroid));
            let norm = dir.norm();
            if norm > 1e-12 {
                let u = dir / norm;
                let v = u.dot(x);
                let proj = &self.points * &u;
                let tol = 1e-10 * (1.0 + v.abs());
                let lt = proj.iter().filter(|&&p| p < v - tol).count();
                let gt = proj.iter().filter(|&&p| p > v + tol).count();
                let eq = proj.len() - lt - gt;
                best = best.min((2 * lt + eq).min(2 * gt + eq));
            }
        }
        best as f64 / (2.0 * n)
    }

    pub fn depth(&self, x: &DVector<f64>) -> f64 {
        self.depth_limited(x, self.directions.len())
    }
}

/// Tukey depth of `x` in the rows of `points`.
pub fn tukey_depth<R: Rng + ?Sized>(points: &DMatrix<f64>, x: &DVector<f64>, n_projections: usize, rng: &mut R) -> f64 {
    DepthIndex::new(points, n_projections, rng).depth(x)
}

/// Fraction of `n_check` random retained simulations whose depth is at most
/// the observation's. Returns (depth of obs, P).
pub fn tukey_pvalue<R: Rng + ?Sized>(
    retained: &RetainedSet,
    n_check: usize,
    n_projections: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if retained.len() < 10 {
        return Err(Error::invalid("Tukey P-value needs at least 10 retained simulations"));
    }
    let check = check_subset(retained.len(), n_check, rng)?;
    let index = DepthIndex::new(&retained.stats, n_projections, rng);
    let obs = index.depth(&retained.obs);
    let below = check
        .iter()
        .filter(|&&i| index.depth(&retained.stats.row(i).transpose()) <= obs)
        .count();
    Ok((obs, below as f64 / n_check as f64))
}

pub fn fit_pvalues<R: Rng + ?Sized>(
    post: &GlmPosterior,
    retained: &RetainedSet,
    n_check: usize,
    n_projections: usize,
    rng: &mut R,
) -> Result<FitPValues> {
    let (marginal_density, marginal_density_p) = marginal_density_pvalue(post, retained, n_check, rng)?;
    let (tukey_depth, tukey_p) = tukey_pvalue(retained, n_check, n_projections, rng)?;
    Ok(FitPValues {
        marginal_density,
        marginal_density_p,
        tukey_depth,
        tukey_p,
        n_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_depth_is_exact() {
        let pts = DMatrix::from_fn(11, 1, |i, _| i as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = DepthIndex::new(&pts, 50, &mut rng);
        assert!((idx.depth(&DVector::from_element(1, 5.0)) - 0.5).abs() < 1e-12);
        assert!((idx.depth(&DVector::from_element(1, 10.0)) - 0.5 / 11.0).abs() < 1e-12);
        assert!((idx.depth(&DVector::from_element(1, 2.5)) - 3.0 / 11.0).abs() < 1e-12);
        assert_eq!(idx.depth(&DVector::from_element(1, -1.0)), 0.0);
    }

    #[test]
    fn outside_hull_has_zero_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = DMatrix::from_fn(100, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_eq!(tukey_depth(&pts, &DVector::from_element(3, 10.0), 100, &mut rng), 0.0);
    }

    #[test]
    fn more_directions_never_increase_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = DMatrix::from_fn(60, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let idx = DepthIndex::new(&pts, 500, &mut rng);
        let x = DVector::from_element(4, 0.3);
        let depths: Vec<f64> = [1, 10, 50, 200, 500].iter().map(|&m| idx.depth_limited(&x, m)).collect();
        assert!(depths.windows(2).all(|w| w[1] <= w[0]));
        assert!(depths.iter().all(|d| *d <= 0.5 + 1e-12));
    }
}
