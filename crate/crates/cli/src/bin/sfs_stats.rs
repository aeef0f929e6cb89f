//! Summary statistics of a DAF file, written to `summary_stats-temp.txt`.
//!
//! Usage: `abctk-sfs-stats <file_DAFpop0.obs>`. The input is deleted.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use abc_core::io::{ObservedStats, write_observed};
use abc_core::models::{SFS_STAT_NAMES, read_daf, sfs_stats};
use abc_core::sim::DEFAULT_STATS_FILE;

fn run() -> Result<(), String> {
    let path = std::env::args().nth(1).ok_or("usage: abctk-sfs-stats <sfs file>")?;
    let path = Path::new(&path);
    let sfs = read_daf(path).map_err(|e| e.to_string())?;
    let stats = sfs_stats(&sfs).map_err(|e| e.to_string())?;
    let obs = ObservedStats::new(
        SFS_STAT_NAMES.iter().map(|s| s.to_string()).collect(),
        stats.to_array().to_vec(),
    )
    .map_err(|e| e.to_string())?;
    write_observed(Path::new(DEFAULT_STATS_FILE), &[obs]).map_err(|e| e.to_string())?;
    fs::remove_file(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("abctk-sfs-stats: {e}");
            ExitCode::FAILURE
        }
    }
}
