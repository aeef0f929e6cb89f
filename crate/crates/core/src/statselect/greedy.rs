//! Greedy forward search for the statistics that best separate models.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::choice::{ChoiceMethod, PreparedModels, common_statistics};
use crate::error::{Error, Result};
use crate::io::SimulationTable;
use crate::stats::pearson;
use crate::validation::model_choice_validate;

/// Stop when the best addition gains less than this much power.
pub const MIN_GAIN: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPower {
    pub stats: Vec<String>,
    pub power: f64,
    pub max_correlation: f64,
}

#[derive(Debug, Clone)]
pub struct GreedySearchConfig {
    pub n_val: usize,
    pub max_cor: f64,
    pub method: ChoiceMethod,
    pub standardize: bool,
    /// Every subset is validated on the pseudo-observations drawn from
    /// this seed.
    pub seed: u64,
}

/// Ranked subsets plus the accepted addition path.
#[derive(Debug, Clone)]
pub struct GreedySearch {
    pub ranked: Vec<SubsetPower>,
    pub path: Vec<SubsetPower>,
}

impl GreedySearch {
    pub fn best(&self) -> &SubsetPower {
        &self.ranked[0]
    }

    pub fn find(&self, names: &[&str]) -> Option<&SubsetPower> {
        let want: HashSet<&str> = names.iter().copied().collect();
        self.ranked
            .iter()
            .find(|s| s.stats.len() == want.len() && s.stats.iter().all(|n| want.contains(n.as_str())))
    }

    pub fn to_table_text(&self) -> String {
        let mut s = String::from("rank\tpower\tlargestPairwiseCorrelation\tnumStats\tstatistics\n");
        for (i, r) in self.ranked.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                crate::io::format_number(r.power),
                crate::io::format_number(r.max_correlation),
                r.stats.len(),
                r.stats.join(",")
            ));
        }
        s
    }
}

/// Absolute correlations between statistics over the pooled simulations.
fn correlations(tables: &[&SimulationTable], names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for t in tables {
        let idx = t.stat_indices(names)?;
        for (c, &i) in cols.iter_mut().zip(&idx) {
            c.extend(t.column(i));
        }
    }
    Ok((0..names.len())
        .map(|a| (0..names.len()).map(|b| pearson(&cols[a], &cols[b]).abs()).collect())
        .collect())
}

fn power(tables: &[&SimulationTable], subset: &[String], cfg: &GreedySearchConfig) -> Result<f64> {
    let prep = PreparedModels::new(tables, Some(subset), cfg.method.clone(), None, cfg.standardize)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let v = model_choice_validate(&prep, cfg.n_val, &mut rng)?;
    Ok(v.confusion.overall_accuracy())
}

/// Evaluates every single statistic, then repeatedly adds the statistic
/// giving the largest power until the gain drops below [`MIN_GAIN`].
/// Candidates correlated above `max_cor` with an included statistic are
/// skipped. Subsets are ranked by power, then by size.
pub fn greedy_search(tables: &[&SimulationTable], cfg: &GreedySearchConfig) -> Result<GreedySearch> {
    if tables.len() < 2 {
        return Err(Error::invalid("statistic search needs at least two models"));
    }
    let names = common_statistics(tables)?;
    let cor = correlations(tables, &names)?;
    let mut evaluated: Vec<SubsetPower> = Vec::new();
    let mut path: Vec<SubsetPower> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut current_power = f64::NEG_INFINITY;
    loop {
        let mut best: Option<(usize, SubsetPower)> = None;
        for cand in 0..names.len() {
            if current.contains(&cand) || current.iter().any(|&c| cor[c][cand] > cfg.max_cor) {
                continue;
            }
            let mut idx = current.clone();
            idx.push(cand);
            idx.sort_unstable();
            let subset: Vec<String> = idx.iter().map(|&i| names[i].clone()).collect();
            let p = power(tables, &subset, cfg)?;
            let mut max_correlation = 0.0f64;
            for &a in &idx {
                for &b in &idx {
                    if a != b {
                        max_correlation = max_correlation.max(cor[a][b]);
                    }
                }
            }
            log::info!("power {p:.4} for {}", subset.join(","));
            let entry = SubsetPower {
                stats: subset,
                power: p,
                max_correlation,
            };
            if best.as_ref().is_none_or(|(_, b)| p > b.power) {
                best = Some((cand, entry.clone()));
            }
            evaluated.push(entry);
        }
        let Some((cand, entry)) = best else { break };
        if !current.is_empty() && entry.power - current_power < MIN_GAIN {
            break;
        }
        current.push(cand);
        current_power = entry.power;
        path.push(entry);
    }
    let mut ranked = evaluated;
    ranked.sort_by(|a, b| {
        b.power
            .total_cmp(&a.power)
            .then(a.stats.len().cmp(&b.stats.len()))
    });
    Ok(GreedySearch { ranked, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn model(shift: f64, n: usize, rng: &mut ChaCha8Rng) -> SimulationTable {
        let names = ["theta", "good", "noise"].map(String::from).to_vec();
        let rows = (0..n)
            .map(|_| {
                let th: f64 = rng.random_range(0.0..1.0);
                vec![th, shift + 0.1 * rng.random::<f64>(), rng.random::<f64>() + th]
            })
            .collect();
        SimulationTable::new(names, rows, vec![0]).unwrap()
    }

    #[test]
    fn separating_statistic_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = model(0.0, 400, &mut rng);
        let b = model(5.0, 400, &mut rng);
        let cfg = GreedySearchConfig {
            n_val: 50,
            max_cor: 1.0,
            method: ChoiceMethod::Rejection { tol: 0.05 },
            standardize: true,
            seed: 1,
        };
        let res = greedy_search(&[&a, &b], &cfg).unwrap();
        assert_eq!(res.best().stats, vec!["good".to_string()]);
        assert_eq!(res.best().power, 1.0);
        for w in res.path.windows(2) {
            assert!(w[1].power >= w[0].power);
        }
    }
}
