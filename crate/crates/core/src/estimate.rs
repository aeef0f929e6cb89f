//! Rejection followed by ABC-GLM for one observation.

use nalgebra::{DMatrix, DVector};

use crate::adjust::{GlmPosterior, GridPosterior, ParamScale, glm_fit};
use crate::error::Result;
use crate::io::{ObservedStats, SimulationTable};
use crate::rejection::{Retention, RetainedSet, Standardizer, retain_with};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    pub retention: Retention,
    pub standardize: bool,
    pub posterior_points: usize,
    pub dirac_peak_width: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            retention: Retention::Count(100),
            standardize: true,
            posterior_points: 100,
            dirac_peak_width: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub standardizer: Standardizer,
    pub retained: RetainedSet,
    pub posterior: GlmPosterior,
    pub marginals: Vec<GridPosterior>,
}

impl Estimate {
    pub fn log_marginal_density(&self) -> f64 {
        self.posterior.log_marginal_density(&self.retained.obs)
    }

    /// Sample SD of each retained (unadjusted) parameter.
    pub fn rejection_sd(&self) -> Vec<f64> {
        rejection_sd(&self.retained)
    }
}

pub fn rejection_sd(retained: &RetainedSet) -> Vec<f64> {
    retained
        .params
        .column_iter()
        .map(|c| crate::stats::sd(c.as_slice()))
        .collect()
}

/// Standardizes over `table`, retains, fits the GLM and tabulates the
/// marginal posteriors.
pub fn estimate(table: &SimulationTable, obs: &ObservedStats, cfg: &EstimationConfig) -> Result<Estimate> {
    let st = Standardizer::fit(&[table], obs, cfg.standardize)?;
    let scale = ParamScale::from_table(table)?;
    let z = st.apply_table(table)?;
    let zobs = st.apply_obs(obs)?;
    estimate_prepared(table, &z, &zobs, st, &scale, cfg)
}

/// As [`estimate`] with a precomputed standardization and parameter scale.
pub fn estimate_prepared(
    table: &SimulationTable,
    z: &DMatrix<f64>,
    zobs: &DVector<f64>,
    st: Standardizer,
    scale: &ParamScale,
    cfg: &EstimationConfig,
) -> Result<Estimate> {
    let retained = retain_with(table, z, zobs, &st, cfg.retention)?;
    let fit = glm_fit(&retained, scale)?;
    let posterior = GlmPosterior::new(fit, &retained, cfg.dirac_peak_width)?;
    let marginals = posterior.marginals(&retained.obs, cfg.posterior_points);
    Ok(Estimate {
        standardizer: st,
        retained,
        posterior,
        marginals,
    })
}
