//! Coalescent SFS simulator reading a fastsimcoal-style parameter file.
//!
//! Usage: `abctk-sfs-sim -i <file.par> [other flags ignored]`. Writes
//! `<stem>/<stem>_DAFpop0.obs` in the working directory.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::process::ExitCode;

use abc_core::models::{GrowthModel, simulate_sfs, write_daf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field(line: Option<&str>, i: usize, what: &str) -> Result<f64, String> {
    line.and_then(|l| l.split_whitespace().nth(i))
        .ok_or_else(|| format!("missing {what}"))?
        .parse()
        .map_err(|_| format!("cannot parse {what}"))
}

fn parse_par(text: &str) -> Result<GrowthModel, String> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let after = |prefix: &str, skip: usize| {
        lines
            .iter()
            .position(|l| l.starts_with(prefix))
            .and_then(|i| lines.get(i + 1 + skip).copied())
    };
    let n_cur = field(after("//Population effective sizes", 0), 0, "population size")?;
    let sample = field(after("//Sample sizes", 0), 0, "sample size")?;
    let event = after("//historical event", 1);
    let t1 = field(event, 0, "event time")?;
    let omega = field(event, 4, "event size ratio")?;
    let loci = field(after("//Number of independent loci", 0), 0, "number of loci")?;
    let block = after("//per Block", 0);
    let sites = field(block, 1, "sites per locus")?;
    let mu = field(block, 3, "mutation rate")?;
    let mut m = GrowthModel::new(n_cur, omega, t1, mu);
    m.sample_size = sample as usize;
    m.loci = loci as usize;
    m.sites_per_locus = sites as usize;
    Ok(m)
}

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let par = args
        .iter()
        .position(|a| a == "-i")
        .and_then(|i| args.get(i + 1))
        .ok_or("usage: abctk-sfs-sim -i <file.par>")?;
    let text = fs::read_to_string(par).map_err(|e| format!("{par}: {e}"))?;
    let model = parse_par(&text)?;
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
    let sfs = simulate_sfs(&model, &mut rng).map_err(|e| e.to_string())?;
    let stem = Path::new(par)
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or("parameter file has no name")?;
    fs::create_dir_all(stem).map_err(|e| format!("{stem}: {e}"))?;
    write_daf(&Path::new(stem).join(format!("{stem}_DAFpop0.obs")), &sfs).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abctk-sfs-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
