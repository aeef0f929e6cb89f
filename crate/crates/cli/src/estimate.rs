//! `task estimate`: rejection, ABC-GLM, model choice and validation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use abc_core::adjust::PosteriorCharacteristics;
use abc_core::adjust::grid::marginals_table;
use abc_core::choice::{ChoiceMethod, PreparedModels, glm_model_choice, rejection_model_choice};
use abc_core::error::{Error, Result};
use abc_core::estimate::{Estimate, EstimationConfig, estimate};
use abc_core::io::{
    ObservedStats, OutputTag, SimulationTable, format_number, read_observed, read_table_limited, tagged_path,
    write_table, write_tagged,
};
use abc_core::rejection::{Retention, prune_correlated};
use abc_core::stats::pearson;
use abc_core::validation::{
    ValidationMode, calibration_curve, calibration_table, coverage_tests, cross_validate, marginal_density_pvalue,
    model_choice_validate, tukey_pvalue,
};
use log::{info, warn};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;

pub const DEFAULT_PREFIX: &str = "ABC_GLM";
const DEFAULT_TUKEY_PROJECTIONS: usize = 1000;

pub(crate) fn estimation_config(cfg: &Config) -> Result<EstimationConfig> {
    let d = EstimationConfig::default();
    Ok(EstimationConfig {
        retention: Retention::Count(cfg.require_parsed("numRetained")?),
        standardize: cfg.flag("standardizeStats", d.standardize)?,
        posterior_points: cfg.parse_or("posteriorDensityPoints", d.posterior_points)?,
        dirac_peak_width: cfg.parse_or("diracPeakWidth", d.dirac_peak_width)?,
    })
}

/// Simulation tables named by `simName`, with `params` given once for all
/// models or once per model.
pub(crate) fn read_models(cfg: &Config) -> Result<Vec<SimulationTable>> {
    let names = cfg.list("simName")?;
    let params = cfg.list("params")?;
    if params.len() != 1 && params.len() != names.len() {
        return Err(Error::Config(format!(
            "`params` lists {} entries for {} simulation files",
            params.len(),
            names.len()
        )));
    }
    let max_rows: usize = cfg.require_parsed("maxReadSims")?;
    names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let spec = &params[if params.len() == 1 { 0 } else { i }];
            let t = read_table_limited(Path::new(n), Some(spec), Some(max_rows))?;
            info!("read {} simulations from {n}", t.nrows());
            Ok(t)
        })
        .collect()
}

/// Restricts the observations to statistics kept after correlation checks.
fn select_statistics(cfg: &Config, table: &SimulationTable, obs: &[ObservedStats]) -> Result<Vec<ObservedStats>> {
    let max_cor: f64 = cfg.parse_or("maxCor", 1.0)?;
    let shared: Vec<usize> = table
        .stat_columns()
        .into_iter()
        .filter(|&c| obs[0].get(&table.names()[c]).is_some())
        .collect();
    if cfg.flag("pruneCorrelatedStats", false)? {
        let kept = prune_correlated(table, &shared, max_cor);
        let names: Vec<String> = kept.iter().map(|&c| table.names()[c].clone()).collect();
        return obs
            .iter()
            .map(|o| ObservedStats::new(names.clone(), o.values_for(&names)?))
            .collect();
    }
    if max_cor < 1.0 {
        let cols: Vec<Vec<f64>> = shared.iter().map(|&c| table.column(c)).collect();
        for a in 0..cols.len() {
            for b in a + 1..cols.len() {
                let r = pearson(&cols[a], &cols[b]).abs();
                if r > max_cor {
                    warn!(
                        "statistics `{}` and `{}` are correlated ({r:.3} > maxCor); consider pruneCorrelatedStats",
                        table.names()[shared[a]],
                        table.names()[shared[b]]
                    );
                }
            }
        }
    }
    Ok(obs.to_vec())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn characteristics_text(e: &Estimate) -> String {
    let mut s = PosteriorCharacteristics::HEADER.join("\t");
    s.push('\n');
    for m in &e.marginals {
        let c = m.characteristics();
        s.push_str(&c.name);
        for v in c.values() {
            write!(s, "\t{}", format_number(v)).unwrap();
        }
        s.push('\n');
    }
    s
}

fn plot_path(prefix: &str, model: usize, obs: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}_model{model}_MarginalPosteriorHDI_Obs{obs}.txt"))
}

/// Grid, density and the smallest HDI level containing each grid point.
fn hdi_table(e: &Estimate) -> Result<SimulationTable> {
    let mut names = Vec::new();
    for m in &e.marginals {
        names.extend([m.name.clone(), format!("{}.density", m.name), format!("{}.HDI", m.name)]);
    }
    let n = e.marginals.iter().map(|m| m.grid.len()).max().unwrap_or(0);
    let rows = (0..n)
        .map(|i| {
            e.marginals
                .iter()
                .flat_map(|m| {
                    let i = i.min(m.grid.len() - 1);
                    [m.grid[i], m.density[i], m.hdi_level(m.grid[i])]
                })
                .collect()
        })
        .collect();
    SimulationTable::new(names, rows, Vec::new())
}

fn joint_indices(cfg: &Config, table: &SimulationTable) -> Result<Option<Vec<usize>>> {
    let Some(spec) = cfg.get("jointPosteriors") else {
        return Ok(None);
    };
    let params: Vec<&str> = table.param_names();
    spec.split(',')
        .map(|n| {
            let n = n.trim();
            params
                .iter()
                .position(|p| *p == n)
                .ok_or_else(|| Error::Config(format!("jointPosteriors names unknown parameter `{n}`")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

struct Settings<'a> {
    cfg: &'a Config,
    est_cfg: EstimationConfig,
    prefix: String,
}

/// Outputs for one model and one observation.
fn estimate_one(
    s: &Settings,
    model: usize,
    table: &SimulationTable,
    obs: &ObservedStats,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (cfg, est_cfg, prefix) = (s.cfg, &s.est_cfg, s.prefix.as_str());
    let e = estimate(table, obs, est_cfg)?;
    for m in &e.marginals {
        info!(
            "model {model} obs {k}: {} mode {} mean {} sd {}",
            m.name,
            format_number(m.mode()),
            format_number(m.mean()),
            format_number(m.sd())
        );
    }
    write_tagged(prefix, Some(model), &OutputTag::MarginalPosteriorDensities, Some(k), &marginals_table(&e.marginals)?)?;
    write_text(
        &tagged_path(prefix, Some(model), &OutputTag::MarginalPosteriorCharacteristics, Some(k)),
        &characteristics_text(&e),
    )?;
    if cfg.flag("writeRetained", false)? {
        write_tagged(prefix, Some(model), &OutputTag::BestSimsParamStats, Some(k), &e.retained.to_table(table)?)?;
    }
    if cfg.flag("plotData", false)? {
        write_table(&plot_path(prefix, model, k), &hdi_table(&e)?)?;
    }
    if let Some(idx) = joint_indices(cfg, table)? {
        let points: usize = cfg.parse_or("jointPosteriorDensityPoints", 100)?;
        let grid = e.posterior.joint(&e.retained.obs, &idx, points)?;
        let tag = OutputTag::JointPosterior(idx.iter().map(|i| i + 1).collect());
        write_tagged(prefix, Some(model), &tag, Some(k), &grid.to_table()?)?;
    }
    let md_n: Option<usize> = match cfg.parse("marDensPValue")? {
        Some(n) => Some(n),
        None => cfg.parse("obsPValue")?,
    };
    let tukey_n: Option<usize> = cfg.parse("tukeyPValue")?;
    if md_n.is_some() || tukey_n.is_some() {
        let mut names = Vec::new();
        let mut values = Vec::new();
        if let Some(n) = md_n {
            let (d, p) = marginal_density_pvalue(&e.posterior, &e.retained, n, rng)?;
            info!("model {model} obs {k}: marginal density {} P-value {}", format_number(d), format_number(p));
            names.extend(["marginalDensity".to_string(), "marginalDensityPValue".to_string()]);
            values.extend([d, p]);
        }
        if let Some(n) = tukey_n {
            let proj: usize = cfg.parse_or("tukeyProjections", DEFAULT_TUKEY_PROJECTIONS)?;
            let (d, p) = tukey_pvalue(&e.retained, n, proj, rng)?;
            info!("model {model} obs {k}: Tukey depth {} P-value {}", format_number(d), format_number(p));
            names.extend(["tukeyDepth".to_string(), "tukeyPValue".to_string()]);
            values.extend([d, p]);
        }
        write_tagged(
            prefix,
            Some(model),
            &OutputTag::FitPValues,
            Some(k),
            &SimulationTable::new(names, vec![values], Vec::new())?,
        )?;
    }
    if let Some(n) = cfg.parse::<usize>("retainedValidation")? {
        let run = cross_validate(table, Some(obs), ValidationMode::Retained, n, est_cfg, rng)?;
        report_coverage(&run, "retained")?;
        write_tagged(prefix, Some(model), &OutputTag::RetainedValidation, Some(k), &run.to_table()?)?;
    }
    Ok(())
}

fn report_coverage(run: &abc_core::validation::ValidationRun, what: &str) -> Result<()> {
    if !run.failures.is_empty() {
        warn!("{what} validation: {} replicates failed", run.failures.len());
    }
    for c in coverage_tests(run)? {
        info!(
            "{what} validation {}: KS quantile D={} p={}, HDI D={} p={}",
            c.name,
            format_number(c.quantile.statistic),
            format_number(c.quantile.p_value),
            format_number(c.hdi.statistic),
            format_number(c.hdi.p_value)
        );
    }
    Ok(())
}

fn choice_method(cfg: &Config, est_cfg: &EstimationConfig) -> Result<ChoiceMethod> {
    match cfg.get("modelChoiceMethod").unwrap_or("glm") {
        "glm" | "GLM" => Ok(ChoiceMethod::Glm(est_cfg.clone())),
        "rejection" => Ok(ChoiceMethod::Rejection {
            tol: cfg.parse_or("tolerance", 0.1)?,
        }),
        other => Err(Error::Config(format!("modelChoiceMethod must be glm or rejection, got `{other}`"))),
    }
}

pub fn run(cfg: &Config, rng: &mut ChaCha8Rng) -> Result<()> {
    let est_cfg = estimation_config(cfg)?;
    let prefix = cfg.get("outputPrefix").unwrap_or(DEFAULT_PREFIX).to_string();
    let tables = read_models(cfg)?;
    let obs_all = read_observed(Path::new(cfg.require("obsName")?))?;
    let obs_all = select_statistics(cfg, &tables[0], &obs_all)?;
    let refs: Vec<&SimulationTable> = tables.iter().collect();
    let method = choice_method(cfg, &est_cfg)?;
    let settings = Settings {
        cfg,
        est_cfg: est_cfg.clone(),
        prefix: prefix.clone(),
    };
    for (k, obs) in obs_all.iter().enumerate() {
        if tables.len() > 1 {
            let res = match &method {
                ChoiceMethod::Glm(c) => glm_model_choice(&refs, obs, c, None)?,
                ChoiceMethod::Rejection { tol } => rejection_model_choice(&refs, obs, *tol, est_cfg.standardize, None)?,
            };
            for (m, p) in res.probabilities.iter().enumerate() {
                info!("obs {k}: P(model {m}) = {}", format_number(*p));
            }
            write_tagged(&prefix, None, &OutputTag::ModelFit, Some(k), &res.to_table()?)?;
        }
        for (m, t) in tables.iter().enumerate() {
            estimate_one(&settings, m, t, obs, k, rng)?;
        }
    }
    if let Some(n) = cfg.parse::<usize>("randomValidation")? {
        for (m, t) in tables.iter().enumerate() {
            let run = cross_validate(t, Some(&obs_all[0]), ValidationMode::Random, n, &est_cfg, rng)?;
            report_coverage(&run, "random")?;
            write_tagged(&prefix, Some(m), &OutputTag::RandomValidation, None, &run.to_table()?)?;
        }
    }
    if let Some(n) = cfg.parse::<usize>("modelChoiceValidation")? {
        if tables.len() < 2 {
            return Err(Error::Config("modelChoiceValidation needs at least two models".into()));
        }
        let prep = PreparedModels::for_observation(&refs, &obs_all[0], method, None, est_cfg.standardize)?;
        let v = model_choice_validate(&prep, n, rng)?;
        for m in 0..tables.len() {
            info!("model {m} correctly chosen in {} of pseudo-observations", format_number(v.confusion.accuracy(m)));
        }
        write_tagged(&prefix, None, &OutputTag::ModelChoiceValidation, None, &v.to_table()?)?;
        write_tagged(&prefix, None, &OutputTag::ConfusionMatrix, None, &v.confusion.to_table()?)?;
        let bins = calibration_curve(&v, 0, 10);
        let path = PathBuf::from(format!("{prefix}_modelChoiceCalibration.txt"));
        write_table(&path, &calibration_table(&bins)?)?;
    }
    Ok(())
}
