//! Statistic engineering: boosting, Box-Cox, PLS linear combinations and
//! the greedy model-choice search.

mod boost;
mod boxcox;
mod greedy;
mod pls;

pub use boost::{boost, boost_observed};
pub use boxcox::{BoxCox, fit_boxcox};
pub use greedy::{GreedySearch, GreedySearchConfig, MIN_GAIN, SubsetPower, greedy_search};
pub use pls::{
    LinearCombDef, Nipals, PlsFit, SUFFICIENT_REDUCTION, combination_name, fit_pls, nipals, recommend,
};
