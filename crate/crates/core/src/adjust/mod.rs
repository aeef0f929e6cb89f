//! Post-sampling adjustments of retained simulations.

pub mod glm;
pub mod grid;
pub mod kde;
pub mod regression;

pub use glm::{GlmFit, GlmPosterior, glm_fit, glm_marginal_density};
pub use grid::{GridPosterior, JointGrid, PosteriorCharacteristics};
pub use kde::{WeightedKde, weighted_kde};
pub use regression::{AdjustedSample, loclinear_adjust, ridge_adjust};

use crate::error::{Error, Result};
use crate::io::SimulationTable;

/// Linear map of each parameter onto [0, 1] using bounds taken from a full
/// simulation table (or prior support).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamScale {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ParamScale {
    pub fn new(names: Vec<String>, min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        for (i, n) in names.iter().enumerate() {
            if !(max[i] > min[i]) {
                return Err(Error::invalid(format!(
                    "parameter `{n}` is constant ({}); it cannot be estimated",
                    min[i]
                )));
            }
        }
        Ok(Self { names, min, max })
    }

    pub fn from_table(table: &SimulationTable) -> Result<Self> {
        let cols = table.param_columns();
        let mut min = vec![f64::INFINITY; cols.len()];
        let mut max = vec![f64::NEG_INFINITY; cols.len()];
        for row in table.rows() {
            for (j, &c) in cols.iter().enumerate() {
                min[j] = min[j].min(row[c]);
                max[j] = max[j].max(row[c]);
            }
        }
        Self::new(
            table.param_names().iter().map(|s| s.to_string()).collect(),
            min,
            max,
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    pub fn to_unit(&self, j: usize, x: f64) -> f64 {
        (x - self.min[j]) / self.width(j)
    }

    pub fn from_unit(&self, j: usize, u: f64) -> f64 {
        self.min[j] + u * self.width(j)
    }
}
