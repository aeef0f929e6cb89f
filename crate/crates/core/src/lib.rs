//! Approximate Bayesian computation toolkit: rejection, regression and
//! general-linear-model adjustment, model choice, validation and summary
//! statistic selection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod choice;
pub mod error;
pub mod estimate;
pub mod io;
pub mod models;
pub mod prior;
pub mod rejection;
pub mod sim;
pub mod statselect;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
