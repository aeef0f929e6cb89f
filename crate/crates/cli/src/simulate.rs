//! `task simulate`: prior sampling or ABC-MCMC with a built-in model or an
//! external program.

use std::fs;
use std::path::{Path, PathBuf};

use abc_core::error::{Error, Result};
use abc_core::io::{SimulationTable, read_observed, write_table};
use abc_core::prior::{EstModel, parse_est};
use abc_core::sim::{
    Builtin, ExecBinding, ExecMode, LinearTransform, McmcConfig, Simulator, StartingPoint, StatPipeline, calibrate,
    run_chain, run_standard,
};
use abc_core::statselect::LinearCombDef;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;

pub const BUILTIN_PREFIX: &str = "builtin:";

pub(crate) fn read_est(path: &Path) -> Result<EstModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_est(&text)
}

fn simulator(cfg: &Config) -> Result<Box<dyn Simulator>> {
    let program = cfg.require("simProgram")?;
    if let Some(name) = program.strip_prefix(BUILTIN_PREFIX) {
        return Ok(Box::new(Builtin::from_name(name)?));
    }
    let mode = match (cfg.get("simProtocol"), cfg.get("simInputName")) {
        (Some("easyabc"), _) => ExecMode::EasyAbc,
        (Some(p), _) if p != "args" => {
            return Err(Error::Config(format!("simProtocol must be args or easyabc, got `{p}`")));
        }
        (_, Some(t)) if !t.is_empty() => ExecMode::Template(PathBuf::from(t)),
        _ => ExecMode::Args,
    };
    let post = match cfg.get("sumStatProgram") {
        Some(p) if !p.is_empty() => Some((p, cfg.get("sumStatArgs").unwrap_or(""))),
        _ => None,
    };
    let binding = ExecBinding::new(program, cfg.get("simArgs").unwrap_or(""), mode, post, cfg.get("sumStatName"))?;
    info!("simulator: {}", binding.program().display());
    Ok(Box::new(binding))
}

/// Boosting and linear combinations. `box_cox_default` differs between
/// tasks.
pub(crate) fn pipeline(cfg: &Config, box_cox_default: bool) -> Result<StatPipeline> {
    let boost = cfg.flag("doBoosting", false)?;
    let def_path = cfg.get("linearCombName").or(cfg.get("linearComb")).filter(|s| !s.is_empty());
    let linear = match def_path {
        None => None,
        Some(p) => {
            let def = LinearCombDef::read(Path::new(p))?;
            let components = cfg.parse_or("numLinearComb", def.num_components())?;
            if components == 0 || components > def.num_components() {
                return Err(Error::Config(format!(
                    "numLinearComb must lie in 1..={}, got {components}",
                    def.num_components()
                )));
            }
            Some(LinearTransform {
                def,
                components,
                box_cox: cfg.flag("doBoxCox", box_cox_default)?,
            })
        }
    };
    Ok(StatPipeline { boost, linear })
}

fn mcmc_config(cfg: &Config) -> Result<McmcConfig> {
    let d = McmcConfig::default();
    let starting_point = match cfg.get("startingPoint").unwrap_or("best") {
        "best" => StartingPoint::Best,
        "random" => StartingPoint::Random,
        other => return Err(Error::Config(format!("startingPoint must be best or random, got `{other}`"))),
    };
    Ok(McmcConfig {
        n_calibration: cfg.parse_or("numCaliSims", d.n_calibration)?,
        threshold_prop: cfg.parse_or("thresholdProp", d.threshold_prop)?,
        range_prop: cfg.parse_or("rangeProp", d.range_prop)?,
        starting_point,
        sampling: cfg.parse_or("mcmcSampling", d.sampling)?,
        steps: cfg.require_parsed("numSims")?,
        burn_in: cfg.parse_or("burnIn", d.burn_in)?,
        standardize: cfg.flag("standardizeStats", d.standardize)?,
    })
}

pub fn output_path(out_name: &str, chain: usize) -> PathBuf {
    PathBuf::from(format!("{out_name}_sampling{chain}.txt"))
}

pub fn run(cfg: &Config, seed: u64) -> Result<()> {
    let est = read_est(Path::new(cfg.require("estName")?))?;
    let sim = simulator(cfg)?;
    let pipeline = pipeline(cfg, false)?;
    let out_name = cfg.require("outName")?;
    let workroot = std::env::temp_dir();
    let sampler = cfg.get("samplerType").unwrap_or("standard");
    match sampler {
        "standard" => {
            let n: usize = cfg.require_parsed("numSims")?;
            let run = run_standard(&est, sim.as_ref(), &pipeline, n, seed, &workroot)?;
            let path = output_path(out_name, 1);
            write_table(&path, &run.table)?;
            info!(
                "wrote {} simulations ({} failed) to {}",
                run.table.nrows(),
                run.failures,
                path.display()
            );
        }
        "MCMC" | "mcmc" => {
            let mcfg = mcmc_config(cfg)?;
            let obs = read_observed(Path::new(cfg.require("obsName")?))?;
            let chains: usize = cfg.parse_or("numChains", 1)?;
            if chains == 0 {
                return Err(Error::Config("numChains must be at least 1".into()));
            }
            let cal = calibrate(&est, sim.as_ref(), &pipeline, &obs[0], &mcfg, seed, &workroot)?;
            for c in 0..chains {
                let dir = tempfile::Builder::new()
                    .prefix("abctk-chain-")
                    .tempdir_in(&workroot)
                    .map_err(|e| Error::io(&workroot, e))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX - 1 - c as u64);
                let run = run_chain(&est, sim.as_ref(), &pipeline, &cal, &mcfg, &mut rng, dir.path())?;
                let path = output_path(out_name, c + 1);
                write_table(&path, &run.table)?;
                info!(
                    "chain {}: acceptance rate {:.4}, {} samples written to {}",
                    c + 1,
                    run.acceptance_rate,
                    run.table.nrows(),
                    path.display()
                );
            }
        }
        other => return Err(Error::Config(format!("samplerType must be standard or MCMC, got `{other}`"))),
    }
    Ok(())
}

/// `task transform`: applies a linear-combination definition to a table of
/// statistics.
pub fn transform(cfg: &Config) -> Result<()> {
    let pipeline = pipeline(cfg, true)?;
    let Some(t) = &pipeline.linear else {
        return Err(Error::Config("transform needs `linearCombName`".into()));
    };
    let input = Path::new(cfg.require("input")?);
    let output = Path::new(cfg.require("output")?);
    let table = abc_core::io::read_table_limited(input, cfg.get("params").filter(|s| !s.is_empty()), None)?;
    let table = if pipeline.boost {
        abc_core::statselect::boost(&table)?
    } else {
        table
    };
    let out: SimulationTable = if t.box_cox {
        t.def.transform_table(&table, t.components)?
    } else {
        project_table(&table, t)?
    };
    write_table(output, &out)?;
    info!("wrote {} transformed rows to {}", out.nrows(), output.display());
    Ok(())
}

/// Keeps non-statistic columns and appends projections without Box-Cox.
fn project_table(table: &SimulationTable, t: &LinearTransform) -> Result<SimulationTable> {
    let cols = table.stat_indices(&t.def.names)?;
    let keep: Vec<usize> = (0..table.ncols()).filter(|c| !cols.contains(c)).collect();
    let params: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|(_, c)| table.param_columns().contains(c))
        .map(|(i, _)| i)
        .collect();
    let mut out = table.select_columns(&keep, params)?;
    let proj: Vec<Vec<f64>> = table
        .rows()
        .map(|r| {
            let v: Vec<f64> = cols.iter().map(|&c| r[c]).collect();
            t.def.project(&v, t.components)
        })
        .collect::<Result<_>>()?;
    for k in 0..t.components {
        let col: Vec<f64> = proj.iter().map(|p| p[k]).collect();
        out.push_column(abc_core::statselect::combination_name(k + 1), &col)?;
    }
    Ok(out)
}
