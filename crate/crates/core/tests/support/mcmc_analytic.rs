//! ABC-MCMC on a model whose ABC posterior is known in closed form.
//!
//! `S ~ N(theta, 1)`, observation 0, `theta ~ U[-3, 3]` restricted by the
//! rule `theta < 2.5`. With a fixed tolerance the chain targets
//! `Phi(eps - theta) - Phi(-eps - theta)` on `[-3, 2.5]`.

use std::path::Path;

use abc_core::error::Result;
use abc_core::io::ObservedStats;
use abc_core::prior::{ParamDraw, parse_est};
use abc_core::rejection::Standardizer;
use abc_core::sim::{Calibration, McmcConfig, Simulator, StatPipeline, run_chain};
use abc_core::stats::ks_test;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

struct Indicator;

impl Simulator for Indicator {
    fn simulate(&self, draw: &ParamDraw, _: &Path, rng: &mut ChaCha8Rng) -> Result<ObservedStats> {
        let z: f64 = rng.sample(StandardNormal);
        ObservedStats::new(vec!["s".into()], vec![draw.values()[0] + z])
    }
}

const EPS: f64 = 0.5;
const LO: f64 = -3.0;
const HI: f64 = 2.5;

/// CDF of the analytic target by trapezoid integration on a fine grid.
fn target_cdf() -> impl Fn(f64) -> f64 {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let n = 20_000;
    let h = (HI - LO) / n as f64;
    let dens: Vec<f64> = (0..=n)
        .map(|i| {
            let t = LO + i as f64 * h;
            phi.cdf(EPS - t) - phi.cdf(-EPS - t)
        })
        .collect();
    let mut cum = vec![0.0; n + 1];
    for i in 1..=n {
        cum[i] = cum[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cum[n];
    move |x: f64| {
        if x <= LO {
            return 0.0;
        }
        if x >= HI {
            return 1.0;
        }
        let f = (x - LO) / h;
        let i = (f.floor() as usize).min(n - 1);
        let w = f - i as f64;
        (cum[i] * (1.0 - w) + cum[i + 1] * w) / total
    }
}

pub fn chain_matches_analytic_target() {
    let est = parse_est("[PARAMETERS]\n0 theta unif -3 3 output\n[RULES]\ntheta < 2.5\n").unwrap();
    let obs = ObservedStats::new(vec!["s".into()], vec![0.0]).unwrap();
    let start = est.complete(&[0.0]).unwrap();
    let cal = Calibration {
        epsilon: EPS,
        widths: vec![1.0],
        start,
        start_stats: obs.clone(),
        start_distance: 0.0,
        standardizer: Standardizer {
            names: vec!["s".into()],
            center: vec![0.0],
            scale: vec![1.0],
        },
        obs,
    };
    let sampling = 20;
    let cfg = McmcConfig {
        sampling,
        steps: sampling * 11_112,
        burn_in: 0.1,
        ..McmcConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let run = run_chain(&est, &Indicator, &StatPipeline::default(), &cal, &cfg, &mut rng, dir.path()).unwrap();
    let theta = run.table.column(0);
    assert!(theta.len() >= 10_000, "{} samples", theta.len());
    let dist = run.table.column(run.table.ncols() - 1);
    assert!(dist.iter().all(|&d| d < EPS));
    assert!(theta.iter().all(|&t| (LO..HI).contains(&t)));
    let ks = ks_test(&theta, target_cdf());
    assert!(ks.statistic < 0.05, "KS statistic {}", ks.statistic);
}
