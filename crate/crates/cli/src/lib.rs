//! Command-line front end: configuration, task dispatch and exit codes.

pub mod config;
pub mod estimate;
pub mod simulate;

use std::path::{Path, PathBuf};

use abc_core::choice::ChoiceMethod;
use abc_core::error::{Error, Result};
use abc_core::io::{OutputTag, write_table};
use abc_core::statselect::{GreedySearchConfig, fit_pls, greedy_search};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::Config;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TASKS: [&str; 5] = ["estimate", "simulate", "transform", "findStatsModelChoice", "findPLS"];

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Est { .. } | Error::Eval { .. } | Error::InvalidInput(_) => 1,
        Error::Io { .. } | Error::Table { .. } => 2,
        Error::Numerical(_) | Error::Collinear(_) => 3,
        Error::Simulator(_) => 4,
    }
}

fn log_header(cfg: &Config, seed: u64) {
    info!("abctk {VERSION}");
    info!("seed {seed}");
    for (k, v) in cfg.entries() {
        info!("  {k} = {v}");
    }
    for k in cfg.unknown_keys() {
        warn!("unknown setting `{k}` ignored");
    }
}

fn find_stats_model_choice(cfg: &Config, seed: u64) -> Result<()> {
    let est_cfg = estimate::estimation_config(cfg)?;
    let tables = estimate::read_models(cfg)?;
    let refs: Vec<_> = tables.iter().collect();
    let method = match cfg.get("modelChoiceMethod").unwrap_or("glm") {
        "glm" | "GLM" => ChoiceMethod::Glm(est_cfg.clone()),
        "rejection" => ChoiceMethod::Rejection {
            tol: cfg.parse_or("tolerance", 0.1)?,
        },
        other => return Err(Error::Config(format!("modelChoiceMethod must be glm or rejection, got `{other}`"))),
    };
    let search = greedy_search(
        &refs,
        &GreedySearchConfig {
            n_val: cfg.require_parsed("modelChoiceValidation")?,
            max_cor: cfg.parse_or("maxCorSSFinder", 1.0)?,
            method,
            standardize: est_cfg.standardize,
            seed,
        },
    )?;
    let best = search.best();
    info!("best subset {} with power {:.4}", best.stats.join(","), best.power);
    let prefix = cfg.get("outputPrefix").unwrap_or(estimate::DEFAULT_PREFIX);
    let path = abc_core::io::tagged_path(prefix, None, &OutputTag::SearchStatsGreedySearch, None);
    estimate::write_text(&path, &search.to_table_text())?;
    info!("wrote {}", path.display());
    Ok(())
}

fn find_pls(cfg: &Config) -> Result<()> {
    let name = cfg.require("simName")?;
    let table = abc_core::io::read_table_limited(
        Path::new(name),
        Some(cfg.require("params")?),
        cfg.parse("maxReadSims")?,
    )?;
    let table = if cfg.flag("doBoosting", false)? {
        abc_core::statselect::boost(&table)?
    } else {
        table
    };
    let k_max = cfg.parse_or("numComponents", table.stat_columns().len().min(10))?;
    let fit = fit_pls(&table, k_max, cfg.parse_or("cvFolds", 10)?)?;
    info!("RMSEP suggests {} components", fit.recommended);
    let out = PathBuf::from(cfg.get("linearCombName").unwrap_or("PLSdef.txt"));
    fit.def.write(&out)?;
    let prefix = cfg.get("outputPrefix").unwrap_or(estimate::DEFAULT_PREFIX);
    write_table(&PathBuf::from(format!("{prefix}_RMSEP.txt")), &fit.rmsep_table()?)?;
    info!("wrote {}", out.display());
    Ok(())
}

/// Runs one task under an already-built configuration.
pub fn dispatch(cfg: &Config) -> Result<()> {
    let seed: u64 = match cfg.parse("seed")? {
        Some(s) => s,
        None => rand::random(),
    };
    log_header(cfg, seed);
    let task = cfg.require("task")?;
    let threads: usize = cfg.parse_or("threads", 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| match task {
        "estimate" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            estimate::run(cfg, &mut rng)
        }
        "simulate" => simulate::run(cfg, seed),
        "transform" => simulate::transform(cfg),
        "findStatsModelChoice" => find_stats_model_choice(cfg, seed),
        "findPLS" => find_pls(cfg),
        other => Err(Error::Config(format!("unknown task `{other}`; expected one of {}", TASKS.join(", ")))),
    })
}

/// Parses arguments, runs the task and returns the process exit status.
pub fn run(args: &[String]) -> i32 {
    let result = Config::from_args(args).and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
