//! Leave-one-out parameter validation and coverage tests.

use rand::Rng;
use rand::seq::index;
use rayon::prelude::*;

use crate::adjust::{GlmPosterior, ParamScale, glm_fit};
use crate::error::{Error, Result};
use crate::estimate::{EstimationConfig, estimate};
use crate::io::{ObservedStats, SimulationTable};
use crate::rejection::{Standardizer, retain_excluding};
use crate::stats::{KsTest, ks_uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Pseudo-observations drawn among all simulations.
    Random,
    /// Pseudo-observations drawn among those retained for the observation.
    Retained,
}

/// Estimates for one pseudo-observation, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub row: usize,
    pub truth: Vec<f64>,
    pub mode: Vec<f64>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    /// Posterior mass below the true value.
    pub quantile: Vec<f64>,
    /// Smallest HDI level containing the true value.
    pub hdi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValidationRun {
    pub param_names: Vec<String>,
    pub rows: Vec<ValidationRow>,
    /// (table row, error message) of replicates whose estimation failed.
    pub failures: Vec<(usize, String)>,
}

impl ValidationRun {
    pub fn column(&self, param: usize, pick: impl Fn(&ValidationRow) -> &Vec<f64>) -> Vec<f64> {
        self.rows.iter().map(|r| pick(r)[param]).collect()
    }

    pub fn to_table(&self) -> Result<SimulationTable> {
        let mut names = Vec::new();
        for p in &self.param_names {
            names.push(p.clone());
            for suffix in ["mode", "mean", "median", "quantile", "HDI"] {
                names.push(format!("{p}_{suffix}"));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                (0..self.param_names.len())
                    .flat_map(|j| [r.truth[j], r.mode[j], r.mean[j], r.median[j], r.quantile[j], r.hdi[j]])
                    .collect()
            })
            .collect();
        SimulationTable::new(names, rows, Vec::new())
    }
}

/// Runs the estimator with each of `n_val` simulations as the observation
/// and the remaining simulations as reference. Statistics are those shared
/// with `obs` when given; retained mode requires `obs`.
pub fn cross_validate<R: Rng + ?Sized>(
    table: &SimulationTable,
    obs: Option<&ObservedStats>,
    mode: ValidationMode,
    n_val: usize,
    cfg: &EstimationConfig,
    rng: &mut R,
) -> Result<ValidationRun> {
    if n_val == 0 || n_val >= table.nrows() {
        return Err(Error::invalid(format!(
            "number of validation simulations must be in 1..{}, got {n_val}",
            table.nrows()
        )));
    }
    let st = match obs {
        Some(o) => Standardizer::fit(&[table], o, cfg.standardize)?,
        None => {
            let names: Vec<String> = table
                .stat_columns()
                .into_iter()
                .map(|c| table.names()[c].clone())
                .collect();
            Standardizer::fit_unobserved(&[table], &names, cfg.standardize)?
        }
    };
    let scale = ParamScale::from_table(table)?;
    let z = st.apply_table(table)?;
    let pseudo: Vec<usize> = match mode {
        ValidationMode::Random => {
            let mut v = index::sample(rng, table.nrows(), n_val).into_vec();
            v.sort_unstable();
            v
        }
        ValidationMode::Retained => {
            let o = obs.ok_or_else(|| Error::invalid("retained validation needs an observation"))?;
            let est = estimate(table, o, cfg)?;
            let pool = &est.retained.indices;
            if n_val > pool.len() {
                return Err(Error::invalid(format!(
                    "cannot draw {n_val} validation simulations among {} retained",
                    pool.len()
                )));
            }
            let mut v: Vec<usize> = index::sample(rng, pool.len(), n_val)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            v.sort_unstable();
            v
        }
    };
    let pcols = table.param_columns().to_vec();
    let outcomes: Vec<std::result::Result<ValidationRow, (usize, String)>> = pseudo
        .par_iter()
        .map(|&row| {
            let run = || -> Result<ValidationRow> {
                let zobs = z.row(row).transpose();
                let retained = retain_excluding(table, &z, &zobs, &st, cfg.retention, Some(row))?;
                let fit = glm_fit(&retained, &scale)?;
                let post = GlmPosterior::new(fit, &retained, cfg.dirac_peak_width)?;
                let marginals = post.marginals(&zobs, cfg.posterior_points);
                let truth: Vec<f64> = pcols.iter().map(|&c| table.value(row, c)).collect();
                Ok(ValidationRow {
                    row,
                    mode: marginals.iter().map(|m| m.mode()).collect(),
                    mean: marginals.iter().map(|m| m.mean()).collect(),
                    median: marginals.iter().map(|m| m.quantile(0.5)).collect(),
                    quantile: marginals.iter().zip(&truth).map(|(m, t)| m.cdf(*t)).collect(),
                    hdi: marginals.iter().zip(&truth).map(|(m, t)| m.hdi_level(*t)).collect(),
                    truth,
                })
            };
            run().map_err(|e| (row, e.to_string()))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(f) => {
                log::warn!("validation replicate at row {} failed: {}", f.0, f.1);
                failures.push(f);
            }
        }
    }
    Ok(ValidationRun {
        param_names: table.param_names().iter().map(|s| s.to_string()).collect(),
        rows,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTest {
    pub name: String,
    pub quantile: KsTest,
    pub hdi: KsTest,
}

/// KS tests of the posterior quantiles and HDI levels against U(0, 1).
pub fn coverage_tests(run: &ValidationRun) -> Result<Vec<CoverageTest>> {
    if run.rows.len() < 20 {
        return Err(Error::invalid(format!(
            "coverage tests need at least 20 validation rows, got {}",
            run.rows.len()
        )));
    }
    Ok(run
        .param_names
        .iter()
        .enumerate()
        .map(|(j, name)| CoverageTest {
            name: name.clone(),
            quantile: ks_uniform(&run.column(j, |r| &r.quantile)),
            hdi: ks_uniform(&run.column(j, |r| &r.hdi)),
        })
        .collect())
}
