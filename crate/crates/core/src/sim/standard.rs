//! Simulations with parameters drawn from the prior.

use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Simulator, StatPipeline};
use crate::error::{Error, Result};
use crate::io::{ObservedStats, SimulationTable};
use crate::prior::{EstModel, ParamDraw};

/// Rows handled by one worker stream.
const BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct StandardRun {
    pub table: SimulationTable,
    /// Draws skipped after failing twice.
    pub failures: usize,
    pub attempts: usize,
}

/// Runs the simulator, retrying the same draw once. `Ok(None)` means both
/// runs failed; configuration errors are returned immediately.
pub fn simulate_with_retry(
    sim: &dyn Simulator,
    draw: &ParamDraw,
    workdir: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<Option<ObservedStats>> {
    let mut last = None;
    for attempt in 0..2 {
        match sim.simulate(draw, workdir, rng) {
            Ok(s) => return Ok(Some(s)),
            Err(e @ (Error::Config(_) | Error::Eval { .. })) => return Err(e),
            Err(e) => {
                if attempt == 0 {
                    warn!("simulation failed, retrying: {e}");
                }
                last = Some(e);
            }
        }
    }
    if let Some(e) = last {
        warn!("simulation failed twice, skipping draw: {e}");
    }
    Ok(None)
}

pub(crate) struct RawSims {
    pub draws: Vec<ParamDraw>,
    pub stats: Vec<ObservedStats>,
    pub failures: usize,
}

fn run_block(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    seed: u64,
    block: usize,
    count: usize,
    workroot: &Path,
) -> Result<RawSims> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let dir = tempfile::Builder::new()
        .prefix("abctk-worker-")
        .tempdir_in(workroot)
        .map_err(|e| Error::io(workroot, e))?;
    let mut out = RawSims {
        draws: Vec::with_capacity(count),
        stats: Vec::with_capacity(count),
        failures: 0,
    };
    for _ in 0..count {
        let draw = est.sample(&mut rng)?;
        match simulate_with_retry(sim, &draw, dir.path(), &mut rng)? {
            Some(s) => match pipeline.apply(&s) {
                Ok(t) => {
                    out.draws.push(draw);
                    out.stats.push(t);
                }
                Err(e) => {
                    warn!("statistics transform failed, skipping draw: {e}");
                    out.failures += 1;
                }
            },
            None => out.failures += 1,
        }
    }
    Ok(out)
}

/// Prior draws and their transformed statistics. Blocks of draws use
/// separate streams of the seeded generator, so output does not depend on
/// the thread count.
pub(crate) fn simulate_prior(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    n_sims: usize,
    seed: u64,
    workroot: &Path,
) -> Result<RawSims> {
    let blocks = n_sims.div_ceil(BLOCK);
    let parts: Vec<RawSims> = (0..blocks)
        .into_par_iter()
        .map(|b| run_block(est, sim, pipeline, seed, b, BLOCK.min(n_sims - b * BLOCK), workroot))
        .collect::<Result<_>>()?;
    let mut all = RawSims {
        draws: Vec::with_capacity(n_sims),
        stats: Vec::with_capacity(n_sims),
        failures: 0,
    };
    for p in parts {
        all.draws.extend(p.draws);
        all.stats.extend(p.stats);
        all.failures += p.failures;
    }
    if all.draws.is_empty() && n_sims > 0 {
        return Err(Error::Simulator(format!("all {n_sims} simulations failed")));
    }
    if let Some(first) = all.stats.first() {
        for (i, s) in all.stats.iter().enumerate() {
            if s.names != first.names {
                return Err(Error::Simulator(format!(
                    "statistics header of simulation {} ({}) differs from the first ({})",
                    i + 1,
                    s.names.join(" "),
                    first.names.join(" ")
                )));
            }
        }
    }
    Ok(all)
}

/// `n_sims` prior simulations as a table of output parameters followed by
/// statistics. Scratch directories are created under `workroot`.
pub fn run_standard(
    est: &EstModel,
    sim: &dyn Simulator,
    pipeline: &StatPipeline,
    n_sims: usize,
    seed: u64,
    workroot: &Path,
) -> Result<StandardRun> {
    let raw = simulate_prior(est, sim, pipeline, n_sims, seed, workroot)?;
    let params = est.output_names();
    let mut names = params.clone();
    names.extend(raw.stats[0].names.iter().cloned());
    let mut data = Vec::with_capacity(raw.draws.len() * names.len());
    for (d, s) in raw.draws.iter().zip(&raw.stats) {
        data.extend(d.output_values());
        data.extend(&s.values);
    }
    if raw.failures > 0 {
        warn!("{} of {n_sims} simulations failed and were skipped", raw.failures);
    }
    info!("{} simulations completed", raw.draws.len());
    Ok(StandardRun {
        table: SimulationTable::from_flat(names, data, (0..params.len()).collect())?,
        failures: raw.failures,
        attempts: n_sims,
    })
}
