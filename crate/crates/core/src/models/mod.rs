//! In-process simulators and statistic calculators.

pub mod coalescent;
pub mod sfs;
pub mod toy;

pub use crate::prior::tau_to_generations;
pub use coalescent::{GrowthModel, simulate_sfs};
pub use sfs::{Sfs, SfsStats, SFS_STAT_NAMES, read_daf, sfs_stats, write_daf};
pub use toy::{
    TOY_OBSERVED, TOY_STAT_NAMES, ToyModel, ToyParams, simulate_toy, toy_observed, toy_stats, toy_table,
};
