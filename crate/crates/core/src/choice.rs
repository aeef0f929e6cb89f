//! Posterior model probabilities and Bayes factors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::adjust::{GlmPosterior, ParamScale, glm_fit};
use crate::error::{Error, Result};
use crate::estimate::EstimationConfig;
use crate::io::{ObservedStats, SimulationTable};
use crate::rejection::{Retention, Standardizer, euclidean_distances, nearest, retain_excluding};

#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceMethod {
    /// Relative proportions of pooled accepted simulations at tolerance `tol`.
    Rejection { tol: f64 },
    /// GLM marginal densities of each model.
    Glm(EstimationConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelChoiceResult {
    /// Log marginal density (GLM) or log acceptance fraction (rejection).
    pub log_evidence: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `bayes_factors[(i, j)] = evidence_i / evidence_j`.
    pub bayes_factors: DMatrix<f64>,
}

impl ModelChoiceResult {
    pub fn from_log_evidence(log_evidence: Vec<f64>, priors: &[f64]) -> Self {
        let m = log_evidence.len();
        let lp: Vec<f64> = log_evidence
            .iter()
            .zip(priors)
            .map(|(e, p)| e + p.ln())
            .collect();
        let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let probabilities = if max.is_finite() {
            let w: Vec<f64> = lp.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v / total).collect()
        } else {
            let total: f64 = priors.iter().sum();
            priors.iter().map(|p| p / total).collect()
        };
        let bayes_factors = DMatrix::from_fn(m, m, |i, j| {
            let (a, b) = (log_evidence[i], log_evidence[j]);
            if i == j || (a == b) {
                1.0
            } else {
                (a - b).exp()
            }
        });
        Self {
            log_evidence,
            probabilities,
            bayes_factors,
        }
    }

    pub fn evidence(&self) -> Vec<f64> {
        self.log_evidence.iter().map(|v| v.exp()).collect()
    }

    /// Index of the most probable model (first on ties).
    pub fn best(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probabilities.len() {
            if self.probabilities[i] > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    /// One row per model: evidence, probability, Bayes factor against model 0.
    pub fn to_table(&self) -> Result<SimulationTable> {
        let names = ["model", "marginalDensity", "logMarginalDensity", "posteriorProbability", "BF_vs_model0"]
            .map(String::from)
            .to_vec();
        let rows = (0..self.probabilities.len())
            .map(|i| {
                vec![
                    i as f64,
                    self.log_evidence[i].exp(),
                    self.log_evidence[i].max(-1e300),
                    self.probabilities[i],
                    self.bayes_factors[(i, 0)].min(f64::MAX),
                ]
            })
            .collect();
        SimulationTable::new(names, rows, Vec::new())
    }
}

/// Statistic names shared by every table, failing unless all tables expose
/// the same set.
pub fn common_statistics(tables: &[&SimulationTable]) -> Result<Vec<String>> {
    let first = tables.first().ok_or_else(|| Error::invalid("no models given"))?;
    let names: Vec<String> = first
        .stat_columns()
        .into_iter()
        .map(|c| first.names()[c].clone())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    for (m, t) in tables.iter().enumerate().skip(1) {
        let mut other: Vec<String> = t
            .stat_columns()
            .into_iter()
            .map(|c| t.names()[c].clone())
            .collect();
        other.sort();
        if other != sorted {
            return Err(Error::invalid(format!(
                "model {m} does not provide the same summary statistics as model 0"
            )));
        }
    }
    Ok(names)
}

fn uniform_priors(m: usize, priors: Option<&[f64]>) -> Result<Vec<f64>> {
    match priors {
        None => Ok(vec![1.0 / m as f64; m]),
        Some(p) if p.len() == m && p.iter().all(|v| *v > 0.0) => Ok(p.to_vec()),
        Some(_) => Err(Error::invalid(format!(
            "model prior weights must be {m} positive numbers"
        ))),
    }
}

/// Models standardized on one pooled scale, ready for repeated model
/// choice against many observations.
#[derive(Debug, Clone)]
pub struct PreparedModels<'a> {
    pub tables: Vec<&'a SimulationTable>,
    pub standardizer: Standardizer,
    pub standardized: Vec<DMatrix<f64>>,
    scales: Vec<ParamScale>,
    pub method: ChoiceMethod,
    pub priors: Vec<f64>,
}

impl<'a> PreparedModels<'a> {
    /// `stat_names` restricts the statistics used; `None` uses all common ones.
    pub fn new(
        tables: &[&'a SimulationTable],
        stat_names: Option<&[String]>,
        method: ChoiceMethod,
        priors: Option<&[f64]>,
        standardize: bool,
    ) -> Result<Self> {
        let common = common_statistics(tables)?;
        let names: Vec<String> = match stat_names {
            None => common,
            Some(sel) => {
                if let Some(bad) = sel.iter().find(|n| !common.contains(n)) {
                    return Err(Error::invalid(format!("unknown statistic `{bad}`")));
                }
                sel.to_vec()
            }
        };
        let standardizer = Standardizer::fit_unobserved(tables, &names, standardize)?;
        Self::with_standardizer(tables, standardizer, method, priors)
    }

    /// Uses the statistics shared with `obs` and checks constant columns
    /// against it.
    pub fn for_observation(
        tables: &[&'a SimulationTable],
        obs: &ObservedStats,
        method: ChoiceMethod,
        priors: Option<&[f64]>,
        standardize: bool,
    ) -> Result<Self> {
        common_statistics(tables)?;
        let standardizer = Standardizer::fit(tables, obs, standardize)?;
        Self::with_standardizer(tables, standardizer, method, priors)
    }

    fn with_standardizer(
        tables: &[&'a SimulationTable],
        standardizer: Standardizer,
        method: ChoiceMethod,
        priors: Option<&[f64]>,
    ) -> Result<Self> {
        let priors = uniform_priors(tables.len(), priors)?;
        let standardized = tables
            .iter()
            .map(|t| standardizer.apply_table(t))
            .collect::<Result<_>>()?;
        let scales = match method {
            ChoiceMethod::Glm(_) => tables
                .iter()
                .map(|t| ParamScale::from_table(t))
                .collect::<Result<_>>()?,
            ChoiceMethod::Rejection { .. } => Vec::new(),
        };
        if let ChoiceMethod::Rejection { tol } = method {
            if !(tol > 0.0 && tol <= 1.0) {
                return Err(Error::invalid(format!("tolerance must be in (0, 1], got {tol}")));
            }
        }
        Ok(Self {
            tables: tables.to_vec(),
            standardizer,
            standardized,
            scales,
            method,
            priors,
        })
    }

    pub fn num_models(&self) -> usize {
        self.tables.len()
    }

    pub fn standardize_obs(&self, obs: &ObservedStats) -> Result<DVector<f64>> {
        self.standardizer.apply_obs(obs)
    }

    /// Standardized statistics of a simulated row.
    pub fn row(&self, model: usize, row: usize) -> DVector<f64> {
        self.standardized[model].row(row).transpose()
    }

    /// Model choice for a standardized observation, optionally treating one
    /// simulation `(model, row)` as absent.
    pub fn choose(&self, zobs: &DVector<f64>, exclude: Option<(usize, usize)>) -> Result<ModelChoiceResult> {
        let log_evidence = match &self.method {
            ChoiceMethod::Rejection { tol } => self.rejection_evidence(zobs, *tol, exclude)?,
            ChoiceMethod::Glm(cfg) => self.glm_evidence(zobs, cfg, exclude)?,
        };
        Ok(ModelChoiceResult::from_log_evidence(log_evidence, &self.priors))
    }

    fn rows_of(&self, m: usize, exclude: Option<(usize, usize)>) -> usize {
        self.tables[m].nrows() - usize::from(matches!(exclude, Some((e, _)) if e == m))
    }

    fn rejection_evidence(
        &self,
        zobs: &DVector<f64>,
        tol: f64,
        exclude: Option<(usize, usize)>,
    ) -> Result<Vec<f64>> {
        let mut all = Vec::new();
        let mut owner = Vec::new();
        for (m, z) in self.standardized.iter().enumerate() {
            let mut d = euclidean_distances(z, zobs);
            if let Some((em, er)) = exclude {
                if em == m {
                    d[er] = f64::INFINITY;
                }
            }
            owner.extend(std::iter::repeat_n(m, d.len()));
            all.extend(d);
        }
        let total: usize = (0..self.num_models()).map(|m| self.rows_of(m, exclude)).sum();
        let keep = Retention::Fraction(tol).count(total).max(1);
        let mut counts = vec![0usize; self.num_models()];
        for i in nearest(&all, keep) {
            counts[owner[i]] += 1;
        }
        Ok(counts
            .iter()
            .enumerate()
            .map(|(m, &c)| (c as f64 / self.rows_of(m, exclude) as f64).ln())
            .collect())
    }

    fn glm_evidence(
        &self,
        zobs: &DVector<f64>,
        cfg: &EstimationConfig,
        exclude: Option<(usize, usize)>,
    ) -> Result<Vec<f64>> {
        (0..self.num_models())
            .map(|m| {
                let ex = exclude.and_then(|(em, er)| (em == m).then_some(er));
                let retained = retain_excluding(
                    self.tables[m],
                    &self.standardized[m],
                    zobs,
                    &self.standardizer,
                    cfg.retention,
                    ex,
                )?;
                let fit = glm_fit(&retained, &self.scales[m])?;
                let post = GlmPosterior::new(fit, &retained, cfg.dirac_peak_width)?;
                let acceptance = retained.len() as f64 / retained.total_rows as f64;
                Ok(post.log_marginal_density(zobs) + acceptance.ln())
            })
            .collect()
    }
}

/// Pooled rejection: retain `ceil(tol * total)` rows over all models and
/// compare acceptance fractions.
pub fn rejection_model_choice(
    tables: &[&SimulationTable],
    obs: &ObservedStats,
    tol: f64,
    standardize: bool,
    priors: Option<&[f64]>,
) -> Result<ModelChoiceResult> {
    let prep = PreparedModels::for_observation(tables, obs, ChoiceMethod::Rejection { tol }, priors, standardize)?;
    prep.choose(&prep.standardize_obs(obs)?, None)
}

/// Per-model retention and GLM marginal densities on a pooled scale.
pub fn glm_model_choice(
    tables: &[&SimulationTable],
    obs: &ObservedStats,
    cfg: &EstimationConfig,
    priors: Option<&[f64]>,
) -> Result<ModelChoiceResult> {
    let prep = PreparedModels::for_observation(
        tables,
        obs,
        ChoiceMethod::Glm(cfg.clone()),
        priors,
        cfg.standardize,
    )?;
    prep.choose(&prep.standardize_obs(obs)?, None)
}

/// Runs `choose` for many pseudo-observations in parallel; results keep the
/// input order.
pub fn choose_many(
    prep: &PreparedModels<'_>,
    pseudo: &[(usize, usize)],
) -> Vec<Result<ModelChoiceResult>> {
    pseudo
        .par_iter()
        .map(|&(m, r)| prep.choose(&prep.row(m, r), Some((m, r))))
        .collect()
}
