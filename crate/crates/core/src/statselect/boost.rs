//! Squares and pairwise products of statistics.

use crate::error::Result;
use crate::io::{ObservedStats, SimulationTable};

fn product_name(a: &str, b: &str) -> String {
    format!("{a}_X_{b}")
}

/// Appends `<a>_X_<b>` for every pair `a <= b` of statistic columns, in
/// column order.
pub fn boost(table: &SimulationTable) -> Result<SimulationTable> {
    let stats = table.stat_columns();
    let mut out = table.clone();
    for (i, &a) in stats.iter().enumerate() {
        let xa = table.column(a);
        for &b in &stats[i..] {
            let xb = table.column(b);
            let prod: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();
            out.push_column(product_name(&table.names()[a], &table.names()[b]), &prod)?;
        }
    }
    Ok(out)
}

pub fn boost_observed(obs: &ObservedStats) -> Result<ObservedStats> {
    let mut names = obs.names.clone();
    let mut values = obs.values.clone();
    for i in 0..obs.names.len() {
        for j in i..obs.names.len() {
            names.push(product_name(&obs.names[i], &obs.names[j]));
            values.push(obs.values[i] * obs.values[j]);
        }
    }
    ObservedStats::new(names, values)
}
