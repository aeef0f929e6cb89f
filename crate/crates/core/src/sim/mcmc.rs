//! ABC-MCMC: calibration of the tolerance and proposal widths from prior
//! simulations, then a random-walk chain whose likelihood ratio is replaced
//! by the indicator `distance < epsilon`.

use std::path::Path;

use log::{info, warn};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::standard::{simulate_prior, simulate_with_retry};
use super::{Simulator, StatPipeline};
use crate::error::{Error, Result};
use crate::io::{ObservedStats, SimulationTable};
use crate::prior::{EstModel, ParamDraw, PriorKind};
use crate::rejection::Standardizer;
use crate::stats;

pub const MIN_CALIBRATION: usize = 100;
pub const MIN_RETAINED: usize = 10;
/// Steps over which the acceptance rate is checked.
pub const ACCEPTANCE_WINDOW: usize = 1000;
pub const MIN_ACCEPTANCE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartingPoint {
    Best,
    Random,
}

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub n_calibration: usize,
    pub threshold_prop: f64,
    pub range_prop: f64,
    pub starting_point: StartingPoint,
    /// Record every `sampling` steps.
    pub sampling: usize,
    /// Total chain steps (simulations).
    pub steps: usize,
    /// Fraction of recorded samples dropped from the front.
    pub burn_in: f64,
    pub standardize: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_calibration: 10_000,
            threshold_prop: 0.1,
            range_prop: 1.0,
            starting_point: StartingPoint::Best,
            sampling: 1,
            steps: 10_000,
            burn_in: 0.1,
            standardize: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_calibration < MIN_CALIBRATION {
            return Err(Error::Config(format!("numCaliSims must be at least {MIN_CALIBRATION}")));
        }
        if !(self.threshold_prop > 0.0 && self.threshold_prop < 1.0) {
            return Err(Error::Config("thresholdProp must lie in (0, 1)".into()));
        }
        if self.retained_count(self.n_calibration) < MIN_RETAINED {
            return Err(Error::Config(format!(
                "thresholdProp * numCaliSims must retain at least {MIN_RETAINED} simulations"
            )));
        }
        if !(self.range_prop > 0.0) {
            return Err(Error::Config("rangeProp must be positive".into()));
        }
        if self.sampling == 0 {
            return Err(Error::Config("mcmcSampling must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::Config("burn-in fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn retained_count(&self, n: usize) -> usize {
        (self.threshold_prop * n as f64).ceil() as usize
    }
}

/// Tolerance, proposal widths and starting state of a chain.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub epsilon: f64,
    /// One per raw prior; zero for fixed priors.
    pub widths: Vec<f64>,
    pub start: ParamDraw,
    /// Transformed statistics of the starting simulation.
    pub start_stats: ObservedStats,
    pub start_distance: f64,
    pub standardizer: Standardizer,
    /// The observation after the statistic pipeline.
    pub obs: ObservedStats,
}

impl Calibration {
    pub fn distance(&self, stats: &ObservedStats) -> Result<f64> {
        let a = self.standardizer.apply_obs(stats)?;
        let b = self.standardizer.apply_obs(&self.obs)?;
        Ok(distance(&a, &b))
    }
}

fn distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

fn stats_table(stats: &[ObservedStats]) -> Result<SimulationTable> {
    let names = stats[0].names.clone();
    let data = stats.iter().flat_map(|s| s.values.iter().copied()).collect();
    SimulationTable::from_flat(names, data, Vec::new())
}

/// Runs `n_calibration` prior simulations and derives the tolerance, the
/// proposal widths and the chain's starting point.
pub fn calibrate(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    obs: &ObservedStats,
    cfg: &McmcConfig,
    seed: u64,
    workroot: &Path,
) -> Result<Calibration> {
    cfg.validate()?;
    let obs = pipeline.apply(obs)?;
    let raw = simulate_prior(est, sim, pipeline, cfg.n_calibration, seed, workroot)?;
    let table = stats_table(&raw.stats)?;
    let standardizer = Standardizer::fit(&[&table], &obs, cfg.standardize)?;
    let z = standardizer.apply_table(&table)?;
    let o = standardizer.apply_obs(&obs)?;
    let d: Vec<f64> = (0..z.nrows())
        .map(|r| distance(&z.row(r).transpose(), &o))
        .collect();
    let keep = cfg.retained_count(d.len());
    if keep < MIN_RETAINED {
        return Err(Error::Simulator(format!(
            "only {} calibration simulations succeeded; too few to calibrate",
            d.len()
        )));
    }
    let order = crate::rejection::nearest(&d, d.len());
    let epsilon = d[order[keep - 1]];
    let retained = &order[..keep];
    let n_raw = est.priors.len();
    let widths: Vec<f64> = (0..n_raw)
        .map(|j| {
            let kind = &est.priors[j].kind;
            let Some((lo, hi)) = kind.bounds() else {
                return 0.0;
            };
            let vals: Vec<f64> = retained.iter().map(|&r| raw.draws[r].values()[j]).collect();
            let w = cfg.range_prop * stats::sd(&vals);
            if w > 0.0 {
                w
            } else {
                warn!(
                    "retained values of `{}` do not vary; using 1% of its prior range as proposal width",
                    est.priors[j].name
                );
                0.01 * (hi - lo)
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let start = match cfg.starting_point {
        StartingPoint::Best => order[0],
        StartingPoint::Random => {
            let inside: Vec<usize> = retained.iter().copied().filter(|&r| d[r] < epsilon).collect();
            if inside.is_empty() {
                order[0]
            } else {
                inside[rng.random_range(0..inside.len())]
            }
        }
    };
    info!(
        "calibration: epsilon {epsilon}, widths {:?}, start distance {}",
        widths, d[start]
    );
    Ok(Calibration {
        epsilon,
        widths,
        start: raw.draws[start].clone(),
        start_stats: raw.stats[start].clone(),
        start_distance: d[start],
        standardizer,
        obs,
    })
}

/// `x` folded back into `[lo, hi]` by repeated reflection.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let mut y = (x - lo).rem_euclid(2.0 * span);
    if y > span {
        y = 2.0 * span - y;
    }
    lo + y
}

/// Uniform window of half-width `widths[j]` around each raw value, reflected
/// at the prior bounds.
pub fn propose<R: Rng + ?Sized>(est: &EstModel, raw: &[f64], widths: &[f64], rng: &mut R) -> Vec<f64> {
    raw.iter()
        .zip(&est.priors)
        .zip(widths)
        .map(|((&x, p), &w)| match p.kind {
            PriorKind::Fixed(v) => v,
            ref k => {
                let (lo, hi) = k.bounds().expect("non-fixed priors are bounded");
                if w > 0.0 {
                    reflect(x + rng.random_range(-w..=w), lo, hi)
                } else {
                    x
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct McmcRun {
    /// Output parameters, transformed statistics and `distance`.
    pub table: SimulationTable,
    pub acceptance_rate: f64,
    pub steps: usize,
}

struct State {
    raw: Vec<f64>,
    draw: ParamDraw,
    stats: ObservedStats,
    distance: f64,
    ln_prior: f64,
}

/// Runs one chain from a calibration.
pub fn run_chain(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    cal: &Calibration,
    cfg: &McmcConfig,
    rng: &mut ChaCha8Rng,
    workdir: &Path,
) -> Result<McmcRun> {
    if cfg.sampling == 0 {
        return Err(Error::Config("mcmcSampling must be at least 1".into()));
    }
    let n_raw = est.priors.len();
    let start_raw = cal.start.values()[..n_raw].to_vec();
    let mut cur = State {
        ln_prior: est.ln_prior(&start_raw),
        raw: start_raw,
        draw: cal.start.clone(),
        stats: cal.start_stats.clone(),
        distance: cal.start_distance,
    };
    let params = est.output_names();
    let mut names = params.clone();
    names.extend(cal.start_stats.names.iter().cloned());
    names.push("distance".into());
    let mut rows: Vec<f64> = Vec::new();
    let mut recorded = 0usize;
    let mut accepted = 0usize;
    for step in 1..=cfg.steps {
        if let Some(next) = step_once(est, sim, pipeline, cal, &cur, rng, workdir)? {
            cur = next;
            accepted += 1;
        }
        if step == ACCEPTANCE_WINDOW && (accepted as f64) < MIN_ACCEPTANCE * ACCEPTANCE_WINDOW as f64 {
            return Err(Error::numerical(format!(
                "MCMC acceptance rate {accepted}/{ACCEPTANCE_WINDOW} is below 0.1%; recalibrate with a larger thresholdProp"
            )));
        }
        if step % cfg.sampling == 0 {
            rows.extend(cur.draw.output_values());
            rows.extend(&cur.stats.values);
            rows.push(cur.distance);
            recorded += 1;
        }
    }
    let burn = (cfg.burn_in * recorded as f64).floor() as usize;
    let rows = rows.split_off(burn * names.len());
    let acceptance_rate = if cfg.steps > 0 {
        accepted as f64 / cfg.steps as f64
    } else {
        0.0
    };
    info!("MCMC acceptance rate {acceptance_rate:.4} over {} steps", cfg.steps);
    Ok(McmcRun {
        table: SimulationTable::from_flat(names, rows, (0..params.len()).collect())?,
        acceptance_rate,
        steps: cfg.steps,
    })
}

fn step_once(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    cal: &Calibration,
    cur: &State,
    rng: &mut ChaCha8Rng,
    workdir: &Path,
) -> Result<Option<State>> {
    let raw = propose(est, &cur.raw, &cal.widths, rng);
    let draw = est.complete(&raw)?;
    if !est.rules_hold(&draw) {
        return Ok(None);
    }
    let ln_prior = est.ln_prior(&raw);
    // Prior ratio first: it needs no simulation.
    let u: f64 = rng.random();
    if !(u.ln() < ln_prior - cur.ln_prior) {
        return Ok(None);
    }
    let Some(s) = simulate_with_retry(sim, &draw, workdir, rng)? else {
        return Ok(None);
    };
    let stats = match pipeline.apply(&s) {
        Ok(t) => t,
        Err(e) => {
            warn!("statistics transform failed, proposal rejected: {e}");
            return Ok(None);
        }
    };
    let distance = cal.distance(&stats)?;
    if !(distance < cal.epsilon) {
        return Ok(None);
    }
    Ok(Some(State {
        raw,
        draw,
        stats,
        distance,
        ln_prior,
    }))
}

/// Calibration followed by one chain seeded from `seed`.
pub fn run_mcmc(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    obs: &ObservedStats,
    cfg: &McmcConfig,
    seed: u64,
    workroot: &Path,
) -> Result<(Calibration, McmcRun)> {
    let cal = calibrate(est, sim, pipeline, obs, cfg, seed, workroot)?;
    let dir = tempfile::Builder::new()
        .prefix("abctk-chain-")
        .tempdir_in(workroot)
        .map_err(|e| Error::io(workroot, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    let run = run_chain(est, sim, pipeline, &cal, cfg, &mut rng, dir.path())?;
    Ok((cal, run))
}
