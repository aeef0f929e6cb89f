//! Generating simulations: built-in models and external programs, driven
//! by prior sampling or by ABC-MCMC.

mod exec;
mod mcmc;
mod standard;

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::ObservedStats;
use crate::models::{
    GrowthModel, SFS_STAT_NAMES, TOY_STAT_NAMES, ToyModel, ToyParams, sfs_stats, simulate_sfs, simulate_toy,
};
use crate::prior::ParamDraw;
use crate::statselect::{LinearCombDef, boost_observed};

pub use exec::{DEFAULT_STATS_FILE, ExecBinding, ExecMode, parse_stats_file, render_template, resolve_program};
pub use mcmc::{Calibration, McmcConfig, McmcRun, StartingPoint, calibrate, propose, reflect, run_chain, run_mcmc};
pub use standard::{StandardRun, run_standard, simulate_with_retry};

/// Produces statistics for one complete parameter draw. `workdir` is a
/// scratch directory private to the calling worker.
pub trait Simulator: Send + Sync {
    fn simulate(&self, draw: &ParamDraw, workdir: &Path, rng: &mut ChaCha8Rng) -> Result<ObservedStats>;
}

/// In-process models, registered by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    ToyNormal,
    ToyUniform,
    SfsNeutralGrowth,
}

impl Builtin {
    pub const NAMES: [&'static str; 3] = ["toy-normal", "toy-uniform", "sfs-neutral-growth"];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "toy-normal" => Ok(Builtin::ToyNormal),
            "toy-uniform" => Ok(Builtin::ToyUniform),
            "sfs-neutral-growth" => Ok(Builtin::SfsNeutralGrowth),
            other => Err(Error::Config(format!(
                "unknown builtin simulator `{other}`; known: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

fn required(draw: &ParamDraw, name: &str) -> Result<f64> {
    draw.get(name)
        .ok_or_else(|| Error::Config(format!("builtin simulator needs a parameter named `{name}`")))
}

impl Simulator for Builtin {
    /// Toy models read `mu` and `sigma2`; the SFS model reads `N_CUR`,
    /// `OMEGA`, `T1` and `MUTRATE`.
    fn simulate(&self, draw: &ParamDraw, _workdir: &Path, rng: &mut ChaCha8Rng) -> Result<ObservedStats> {
        let (names, values): (Vec<&str>, Vec<f64>) = match self {
            Builtin::ToyNormal | Builtin::ToyUniform => {
                let model = if *self == Builtin::ToyNormal {
                    ToyModel::Normal
                } else {
                    ToyModel::Uniform
                };
                let p = ToyParams::new(required(draw, "mu")?, required(draw, "sigma2")?);
                let s = simulate_toy(model, p, rng).map_err(|e| Error::Simulator(e.to_string()))?;
                (TOY_STAT_NAMES.to_vec(), s.to_vec())
            }
            Builtin::SfsNeutralGrowth => {
                let m = GrowthModel::new(
                    required(draw, "N_CUR")?,
                    required(draw, "OMEGA")?,
                    required(draw, "T1")?,
                    required(draw, "MUTRATE")?,
                );
                let sfs = simulate_sfs(&m, rng).map_err(|e| Error::Simulator(e.to_string()))?;
                (SFS_STAT_NAMES.to_vec(), sfs_stats(&sfs)?.to_array().to_vec())
            }
        };
        ObservedStats::new(names.into_iter().map(String::from).collect(), values)
    }
}

/// Statistic post-processing applied to every simulation: optional
/// boosting, then an optional linear-combination transform.
#[derive(Debug, Clone, Default)]
pub struct StatPipeline {
    pub boost: bool,
    pub linear: Option<LinearTransform>,
}

#[derive(Debug, Clone)]
pub struct LinearTransform {
    pub def: LinearCombDef,
    pub components: usize,
    /// Apply each statistic's Box-Cox transform before projecting.
    pub box_cox: bool,
}

impl StatPipeline {
    pub fn is_identity(&self) -> bool {
        !self.boost && self.linear.is_none()
    }

    pub fn apply(&self, stats: &ObservedStats) -> Result<ObservedStats> {
        let boosted = if self.boost {
            boost_observed(stats)?
        } else {
            stats.clone()
        };
        match &self.linear {
            None => Ok(boosted),
            Some(t) if t.box_cox => t.def.transform_observed(&boosted, t.components),
            Some(t) => {
                let values = boosted.values_for(&t.def.names)?;
                let out = t.def.project(&values, t.components)?;
                ObservedStats::new(
                    (1..=t.components).map(crate::statselect::combination_name).collect(),
                    out,
                )
            }
        }
    }
}
