//! Independent reference implementations checked against the library.

use abc_core::adjust::{GlmFit, ParamScale, glm_fit, glm_marginal_density, loclinear_adjust};
use abc_core::io::{ObservedStats, SimulationTable};
use abc_core::rejection::{RetainedSet, Retention, retain};
use abc_core::statselect::nipals;
use abc_core::validation::DepthIndex;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Retained set with random statistics that depend linearly on the
/// parameters plus noise.
fn random_retained(n: usize, k: usize, p: usize, rng: &mut ChaCha8Rng) -> RetainedSet {
    let params = DMatrix::from_fn(n, p, |_, _| rng.random_range(0.0..1.0));
    let mix = DMatrix::from_fn(p, k, |_, _| gauss(rng));
    let noise = DMatrix::from_fn(n, k, |_, _| 0.3 * gauss(rng));
    let stats = &params * &mix + noise;
    let obs = DVector::from_fn(k, |_, _| 0.2 * gauss(rng));
    let distances: Vec<f64> = (0..n)
        .map(|i| (stats.row(i).transpose() - &obs).norm())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let stats = DMatrix::from_fn(n, k, |i, j| stats[(order[i], j)]);
    let params = DMatrix::from_fn(n, p, |i, j| params[(order[i], j)]);
    let distances: Vec<f64> = order.iter().map(|&i| distances[i]).collect();
    RetainedSet {
        indices: order,
        epsilon: *distances.last().unwrap(),
        distances,
        stat_names: (0..k).map(|j| format!("s{j}")).collect(),
        param_names: (0..p).map(|j| format!("p{j}")).collect(),
        stats,
        params,
        obs,
        total_rows: n,
    }
}

pub fn loclinear_matches_dense_wls() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let r = random_retained(80, 3, 2, &mut rng);
        let got = loclinear_adjust(&r).unwrap();
        let n = r.len();
        let w: Vec<f64> = r
            .distances
            .iter()
            .map(|d| 1.0 - (d / r.epsilon).powi(2))
            .collect();
        let x = DMatrix::from_fn(n, 4, |i, j| if j == 0 { 1.0 } else { r.stats[(i, j - 1)] - r.obs[j - 1] });
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
        let xtw = x.transpose() * &wm;
        let beta = (&xtw * &x).lu().solve(&(&xtw * &r.params)).unwrap();
        let slopes = beta.rows(1, 3);
        let expected = &r.params - x.columns(1, 3) * slopes;
        assert!((&got.adjusted - &expected).amax() < 1e-8);
        assert!((&got.slopes - slopes).amax() < 1e-8);
    }
}

pub fn glm_fit_matches_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let r = random_retained(60, 4, 2, &mut rng);
        let scale = ParamScale::new(vec!["p0".into(), "p1".into()], vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let fit: GlmFit = glm_fit(&r, &scale).unwrap();
        let n = r.len();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (r.params[(i, 0)] + 1.0) / 2.0,
            _ => r.params[(i, 1)] / 2.0,
        });
        let coef = x.clone().svd(true, true).solve(&r.stats, 1e-14).unwrap();
        let resid = &r.stats - &x * &coef;
        let mut sigma = resid.transpose() * &resid / (n - 3) as f64;
        for i in 0..4 {
            sigma[(i, i)] += 1e-8;
        }
        assert!((fit.c.clone() - coef.row(0).transpose()).amax() < 1e-8);
        assert!((fit.b.clone() - coef.rows(1, 2).transpose()).amax() < 1e-8);
        assert!((fit.sigma.clone() - sigma).amax() < 1e-8);
    }
}

fn ln_mvn(x: &DVector<f64>, mean: &DVector<f64>, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let k = x.len() as f64;
    let z = chol.l().solve_lower_triangular(&(x - mean)).unwrap();
    let ln_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
    -0.5 * z.norm_squared() - ln_det - 0.5 * k * (2.0 * std::f64::consts::PI).ln()
}

pub fn marginal_density_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let r = random_retained(40, 3, 2, &mut rng);
    let scale = ParamScale::new(vec!["p0".into(), "p1".into()], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let fit = glm_fit(&r, &scale).unwrap();
    let width = 0.05;
    let got = glm_marginal_density(&fit, &r, width).unwrap();

    // Integrate the likelihood over the retained-point mixture prior.
    let chol = fit.sigma.clone().cholesky().unwrap();
    let kernel = Normal::new(0.0, width).unwrap();
    let draws = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let j = rng.random_range(0..r.len());
        let theta = DVector::from_fn(2, |a, _| r.params[(j, a)] + kernel.sample(&mut rng));
        let mean = &fit.c + &fit.b * theta;
        let v = ln_mvn(&r.obs, &mean, &chol).exp();
        sum += v;
        sum_sq += v * v;
    }
    let m = sum / draws as f64;
    let se = ((sum_sq / draws as f64 - m * m) / draws as f64).sqrt();
    assert!((got - m).abs() < 3.0 * se, "library {got}, oracle {m} ± {se}");
}

/// Exact half-space depth in the plane, counting points on the boundary
/// as half.
fn exact_depth_2d(points: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let n = points.nrows();
    let mut angles = Vec::new();
    for i in 0..n {
        let dx = points[(i, 0)] - x[0];
        let dy = points[(i, 1)] - x[1];
        if dx.abs() + dy.abs() > 1e-12 {
            let a = dy.atan2(dx);
            angles.push(a + std::f64::consts::FRAC_PI_2);
            angles.push(a - std::f64::consts::FRAC_PI_2);
        }
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut angles: Vec<f64> = angles.into_iter().map(|a| a.rem_euclid(tau)).collect();
    angles.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for (i, &a) in angles.iter().enumerate() {
        let b = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + tau };
        let mid = 0.5 * (a + b);
        let (ux, uy) = (mid.cos(), mid.sin());
        let (mut lt, mut gt, mut eq) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..n {
            let v = ux * (points[(j, 0)] - x[0]) + uy * (points[(j, 1)] - x[1]);
            if v > 1e-12 {
                gt += 1.0;
            } else if v < -1e-12 {
                lt += 1.0;
            } else {
                eq += 1.0;
            }
        }
        best = best.min((lt + 0.5 * eq).min(gt + 0.5 * eq));
    }
    best / n as f64
}

pub fn tukey_depth_matches_exact_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pts = DMatrix::from_fn(50, 2, |_, _| gauss(&mut rng));
    let index = DepthIndex::new(&pts, 1000, &mut rng);
    let mut queries: Vec<DVector<f64>> = (0..20).map(|_| DVector::from_fn(2, |_, _| 1.5 * gauss(&mut rng))).collect();
    queries.extend((0..10).map(|i| pts.row(i).transpose()));
    for q in &queries {
        let exact = exact_depth_2d(&pts, q);
        let approx = index.depth(q);
        assert!(approx >= exact - 1e-12, "projection depth below exact: {approx} < {exact}");
        assert!((approx - exact).abs() <= 0.05, "depth {approx} vs exact {exact} at {q:?}");
    }
}

pub fn retain_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for trial in 0..20 {
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random_range(0.0..1.0), gauss(&mut rng), 3.0 * gauss(&mut rng), gauss(&mut rng) + 5.0])
            .collect();
        let names = vec!["theta".to_string(), "a".into(), "b".into(), "c".into()];
        let table = SimulationTable::new(names.clone(), rows.clone(), vec![0]).unwrap();
        let obs = ObservedStats::new(names[1..].to_vec(), vec![0.1, -0.5, 5.2]).unwrap();
        let standardize = trial % 2 == 0;
        let count = 1 + trial * 3;
        let got = retain(&table, &obs, Retention::Count(count), standardize).unwrap();

        let mut center = [0.0; 3];
        let mut scale = [1.0; 3];
        if standardize {
            for j in 0..3 {
                let col: Vec<f64> = rows.iter().map(|r| r[j + 1]).collect();
                let m = col.iter().sum::<f64>() / 100.0;
                let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 99.0;
                center[j] = m;
                scale[j] = v.sqrt();
            }
        }
        let d: Vec<f64> = rows
            .iter()
            .map(|r| {
                (0..3)
                    .map(|j| ((r[j + 1] - center[j]) / scale[j] - (obs.values[j] - center[j]) / scale[j]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut order: Vec<usize> = (0..100).collect();
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
        assert_eq!(got.indices, order[..count].to_vec());
        for (g, &i) in got.distances.iter().zip(&order) {
            assert!((g - d[i]).abs() < 1e-10);
        }
    }
}

/// Scores from repeated dominant eigenvectors of X'YY'X with X deflation.
fn pls_scores_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, ncomp: usize) -> DMatrix<f64> {
    let mut xd = x.clone();
    let mut scores = DMatrix::zeros(x.nrows(), ncomp);
    for a in 0..ncomp {
        let m = xd.transpose() * y * y.transpose() * &xd;
        let eig = m.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let w = eig.eigenvectors.column(top).into_owned();
        let t = &xd * w;
        let p = xd.transpose() * &t / t.norm_squared();
        xd -= &t * p.transpose();
        scores.set_column(a, &t);
    }
    scores
}

pub fn nipals_scores_match_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let center = |m: DMatrix<f64>| {
        let mut m = m;
        for mut c in m.column_iter_mut() {
            let mean = c.mean();
            c.add_scalar_mut(-mean);
        }
        m
    };
    let x = center(DMatrix::from_fn(50, 8, |_, _| gauss(&mut rng)));
    let coef = DMatrix::from_fn(8, 3, |_, _| gauss(&mut rng));
    let y = center(&x * coef + DMatrix::from_fn(50, 3, |_, _| 0.5 * gauss(&mut rng)));
    let got = nipals(&x, &y, 5).unwrap();
    let oracle = pls_scores_oracle(&x, &y, 5);
    for a in 0..5 {
        let g = got.t.column(a);
        let o = oracle.column(a);
        let sign = if g.dot(&o) < 0.0 { -1.0 } else { 1.0 };
        let diff = (g - o * sign).amax();
        assert!(diff < 1e-6, "component {a}: max difference {diff}");
    }
}
