//! Rejection step: standardize statistics, measure Euclidean distance to the
//! observation and keep the closest simulations.

use std::cmp::Ordering;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::{ObservedStats, SimulationTable};
use crate::stats;

/// Per-statistic centering and scaling, computed over full simulation sets
/// and applied identically to observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean/SD over all rows of all `tables` for the statistics shared with
    /// `obs` (table column order). Constant statistics that equal the
    /// observation are dropped with a warning; constants contradicting it are
    /// an error. With `standardize == false` the transform is the identity.
    pub fn fit(tables: &[&SimulationTable], obs: &ObservedStats, standardize: bool) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::invalid("no simulation tables"))?;
        let names: Vec<String> = first
            .stat_columns()
            .into_iter()
            .map(|c| first.names()[c].clone())
            .filter(|n| obs.get(n).is_some())
            .collect();
        if names.is_empty() {
            return Err(Error::invalid(
                "no statistic names shared between simulations and observation",
            ));
        }
        Self::fit_named(tables, obs, &names, standardize)
    }

    /// As [`Standardizer::fit`] but restricted to `names`.
    pub fn fit_named(
        tables: &[&SimulationTable],
        obs: &ObservedStats,
        names: &[String],
        standardize: bool,
    ) -> Result<Self> {
        Self::fit_inner(tables, Some(obs), names, standardize)
    }

    /// Standardization of `names` without an observation: constant
    /// statistics are dropped with a warning.
    pub fn fit_unobserved(tables: &[&SimulationTable], names: &[String], standardize: bool) -> Result<Self> {
        Self::fit_inner(tables, None, names, standardize)
    }

    fn fit_inner(
        tables: &[&SimulationTable],
        obs: Option<&ObservedStats>,
        names: &[String],
        standardize: bool,
    ) -> Result<Self> {
        let cols: Vec<Vec<usize>> = tables
            .iter()
            .map(|t| t.stat_indices(names))
            .collect::<Result<_>>()?;
        let total: usize = tables.iter().map(|t| t.nrows()).sum();
        if total == 0 {
            return Err(Error::invalid("simulation table is empty"));
        }
        let mut out = Standardizer {
            names: Vec::new(),
            center: Vec::new(),
            scale: Vec::new(),
        };
        for (k, name) in names.iter().enumerate() {
            let mut sum = 0.0;
            for (t, c) in tables.iter().zip(&cols) {
                sum += t.rows().map(|r| r[c[k]]).sum::<f64>();
            }
            let mean = sum / total as f64;
            let mut ss = 0.0;
            for (t, c) in tables.iter().zip(&cols) {
                ss += t.rows().map(|r| (r[c[k]] - mean).powi(2)).sum::<f64>();
            }
            let sd = if total > 1 { (ss / (total - 1) as f64).sqrt() } else { 0.0 };
            if sd <= 1e-12 * mean.abs().max(1.0) {
                match obs {
                    None => {
                        warn!("statistic `{name}` is constant; excluded");
                        continue;
                    }
                    Some(obs) => {
                        let o = obs.get(name).ok_or_else(|| {
                            Error::invalid(format!("observed statistic `{name}` missing"))
                        })?;
                        if (o - mean).abs() <= 1e-9 * mean.abs().max(1.0) {
                            warn!("statistic `{name}` is constant and equals the observation; excluded");
                            continue;
                        }
                        return Err(Error::invalid(format!(
                            "statistic `{name}` is constant ({mean}) in the simulations but observed as {o}"
                        )));
                    }
                }
            }
            out.names.push(name.clone());
            if standardize {
                out.center.push(mean);
                out.scale.push(sd);
            } else {
                out.center.push(0.0);
                out.scale.push(1.0);
            }
        }
        if out.names.is_empty() {
            return Err(Error::invalid("every shared statistic is constant"));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Standardized statistics of every row of `table` (rows × stats).
    pub fn apply_table(&self, table: &SimulationTable) -> Result<DMatrix<f64>> {
        let cols = table.stat_indices(&self.names)?;
        let k = cols.len();
        Ok(DMatrix::from_fn(table.nrows(), k, |r, j| {
            (table.value(r, cols[j]) - self.center[j]) / self.scale[j]
        }))
    }

    pub fn apply_obs(&self, obs: &ObservedStats) -> Result<DVector<f64>> {
        let v = obs.values_for(&self.names)?;
        Ok(DVector::from_iterator(
            v.len(),
            v.iter()
                .enumerate()
                .map(|(j, x)| (x - self.center[j]) / self.scale[j]),
        ))
    }
}

/// Greedy pass in column order: drop a statistic when its absolute Pearson
/// correlation with an already kept statistic exceeds `max_cor`.
pub fn prune_correlated(table: &SimulationTable, stats: &[usize], max_cor: f64) -> Vec<usize> {
    if max_cor >= 1.0 || table.nrows() < 2 {
        return stats.to_vec();
    }
    let columns: Vec<Vec<f64>> = stats.iter().map(|&c| table.column(c)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for (i, &c) in stats.iter().enumerate() {
        let correlated = kept
            .iter()
            .any(|&j| stats::pearson(&columns[i], &columns[j]).abs() > max_cor);
        if correlated {
            warn!(
                "statistic `{}` pruned: correlation above {max_cor}",
                table.names()[c]
            );
        } else {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| stats[i]).collect()
}

/// How many simulations to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retention {
    Count(usize),
    /// Fraction of all rows; the count is `ceil(tol * rows)`.
    Fraction(f64),
}

impl Retention {
    pub fn count(self, rows: usize) -> usize {
        match self {
            Retention::Count(n) => n,
            Retention::Fraction(tol) => (tol * rows as f64 - 1e-9).ceil().max(0.0) as usize,
        }
    }
}

/// Indices of the `count` smallest distances in ascending order; ties keep
/// row order.
pub fn nearest(distances: &[f64], count: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| -> Ordering {
        distances[*a]
            .total_cmp(&distances[*b])
            .then_with(|| a.cmp(b))
    };
    let mut idx: Vec<usize> = (0..distances.len()).collect();
    if count < idx.len() && count > 0 {
        idx.select_nth_unstable_by(count - 1, cmp);
        idx.truncate(count);
    }
    idx.sort_unstable_by(cmp);
    idx.truncate(count);
    idx
}

pub fn euclidean_distances(stats: &DMatrix<f64>, obs: &DVector<f64>) -> Vec<f64> {
    let mut sq = vec![0.0; stats.nrows()];
    for (j, col) in stats.column_iter().enumerate() {
        let o = obs[j];
        for (acc, v) in sq.iter_mut().zip(col.iter()) {
            *acc += (v - o) * (v - o);
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Simulations closest to an observation, with their standardized
/// statistics and raw parameters.
#[derive(Debug, Clone)]
pub struct RetainedSet {
    /// Source-table rows by ascending distance.
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    /// Largest retained distance.
    pub epsilon: f64,
    pub stat_names: Vec<String>,
    pub param_names: Vec<String>,
    /// Standardized statistics, one row per retained simulation.
    pub stats: DMatrix<f64>,
    /// Raw parameter values, one row per retained simulation.
    pub params: DMatrix<f64>,
    /// Standardized observation.
    pub obs: DVector<f64>,
    /// Rows in the source table.
    pub total_rows: usize,
}

impl RetainedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Retained rows (parameters, statistics, distance) as a table.
    pub fn to_table(&self, source: &SimulationTable) -> Result<SimulationTable> {
        let mut names: Vec<String> = source.names().to_vec();
        names.push("distance".into());
        let rows = self
            .indices
            .iter()
            .zip(&self.distances)
            .map(|(&i, &d)| {
                let mut r = source.row(i).to_vec();
                r.push(d);
                r
            })
            .collect();
        SimulationTable::new(names, rows, source.param_columns().to_vec())
    }
}

/// Retains simulations of `table` closest to `obs` under `standardizer`.
pub fn retain_with(
    table: &SimulationTable,
    standardized: &DMatrix<f64>,
    zobs: &DVector<f64>,
    standardizer: &Standardizer,
    retention: Retention,
) -> Result<RetainedSet> {
    retain_excluding(table, standardized, zobs, standardizer, retention, None)
}

/// As [`retain_with`], treating row `exclude` as absent from the table.
pub fn retain_excluding(
    table: &SimulationTable,
    standardized: &DMatrix<f64>,
    zobs: &DVector<f64>,
    standardizer: &Standardizer,
    retention: Retention,
    exclude: Option<usize>,
) -> Result<RetainedSet> {
    let rows = table.nrows() - usize::from(exclude.is_some());
    let count = retention.count(rows);
    if count == 0 {
        return Err(Error::invalid("retention count is zero"));
    }
    if count > rows {
        return Err(Error::invalid(format!(
            "cannot retain {count} of {rows} simulations"
        )));
    }
    let mut all = euclidean_distances(standardized, zobs);
    if let Some(e) = exclude {
        all[e] = f64::INFINITY;
    }
    let indices = nearest(&all, count);
    let distances: Vec<f64> = indices.iter().map(|&i| all[i]).collect();
    let pcols = table.param_columns();
    let params = DMatrix::from_fn(count, pcols.len(), |r, j| table.value(indices[r], pcols[j]));
    let stats = DMatrix::from_fn(count, standardized.ncols(), |r, j| standardized[(indices[r], j)]);
    Ok(RetainedSet {
        epsilon: *distances.last().expect("count > 0"),
        indices,
        distances,
        stat_names: standardizer.names.clone(),
        param_names: table.param_names().iter().map(|s| s.to_string()).collect(),
        stats,
        params,
        obs: zobs.clone(),
        total_rows: rows,
    })
}

/// Standardizes over `table` and retains the closest simulations.
pub fn retain(
    table: &SimulationTable,
    obs: &ObservedStats,
    retention: Retention,
    standardize: bool,
) -> Result<RetainedSet> {
    let st = Standardizer::fit(&[table], obs, standardize)?;
    let z = st.apply_table(table)?;
    let zobs = st.apply_obs(obs)?;
    retain_with(table, &z, &zobs, &st, retention)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(rows: Vec<Vec<f64>>) -> SimulationTable {
        let k = rows[0].len();
        let names = std::iter::once("p".to_string())
            .chain((1..k).map(|i| format!("s{i}")))
            .collect();
        SimulationTable::new(names, rows, vec![0]).unwrap()
    }

    fn obs(values: &[f64]) -> ObservedStats {
        ObservedStats::new((1..=values.len()).map(|i| format!("s{i}")).collect(), values.to_vec())
            .unwrap()
    }

    fn random_table(n: usize, k: usize, seed: u64) -> SimulationTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        table(
            (0..n)
                .map(|_| (0..=k).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn tolerance_fraction() {
        assert_eq!(Retention::Fraction(0.01).count(10_000), 100);
        assert_eq!(Retention::Fraction(0.1).count(20_000), 2000);
        assert_eq!(Retention::Fraction(0.015).count(100), 2);
        let t = random_table(10_000, 2, 1);
        let r = retain(&t, &obs(&[0.0, 0.0]), Retention::Fraction(0.01), true).unwrap();
        assert_eq!(r.len(), 100);
    }

    #[test]
    fn exact_match_ranks_first() {
        let t = random_table(50, 3, 2);
        let target = t.row(17)[1..].to_vec();
        let r = retain(&t, &obs(&target), Retention::Count(5), true).unwrap();
        assert_eq!(r.indices[0], 17);
        assert_eq!(r.distances[0], 0.0);
    }

    #[test]
    fn brute_force_sort_oracle() {
        let t = table(vec![
            vec![0.0, 1.0, 10.0],
            vec![0.0, 2.0, 20.0],
            vec![0.0, 3.0, 10.0],
            vec![0.0, 4.0, 40.0],
            vec![0.0, 5.0, 20.0],
        ]);
        let o = obs(&[2.5, 15.0]);
        // oracle: hand standardization and exhaustive sort
        let col = |j: usize| t.column(j);
        let (m1, s1) = (stats::mean(&col(1)), stats::sd(&col(1)));
        let (m2, s2) = (stats::mean(&col(2)), stats::sd(&col(2)));
        let mut oracle: Vec<(f64, usize)> = (0..5)
            .map(|i| {
                let a = (t.value(i, 1) - m1) / s1 - (2.5 - m1) / s1;
                let b = (t.value(i, 2) - m2) / s2 - (15.0 - m2) / s2;
                ((a * a + b * b).sqrt(), i)
            })
            .collect();
        oracle.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        let r = retain(&t, &o, Retention::Count(5), true).unwrap();
        assert_eq!(r.indices, oracle.iter().map(|x| x.1).collect::<Vec<_>>());
        for (d, (e, _)) in r.distances.iter().zip(&oracle) {
            assert!((d - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_keep_row_order() {
        let t = table(vec![
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![0.0, 1.0],
            vec![0.0, 3.0],
        ]);
        let r = retain(&t, &obs(&[0.0]), Retention::Count(3), false).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2]);
    }

    #[test]
    fn count_all_rows() {
        let t = random_table(40, 2, 5);
        let r = retain(&t, &obs(&[0.1, 0.2]), Retention::Count(40), true).unwrap();
        assert_eq!(r.len(), 40);
        let max = r.distances.iter().cloned().fold(0.0, f64::max);
        assert_eq!(r.epsilon, max);
    }

    #[test]
    fn errors() {
        let t = random_table(10, 2, 5);
        assert!(retain(&t, &obs(&[0.0, 0.0]), Retention::Count(0), true).is_err());
        assert!(retain(&t, &obs(&[0.0, 0.0]), Retention::Count(11), true).is_err());
        let other = ObservedStats::new(vec!["zz".into()], vec![1.0]).unwrap();
        assert!(retain(&t, &other, Retention::Count(2), true).is_err());
    }

    #[test]
    fn zero_variance_statistics() {
        let t = table(vec![vec![0.0, 1.0, 5.0], vec![1.0, 2.0, 5.0], vec![2.0, 3.0, 5.0]]);
        let st = Standardizer::fit(&[&t], &obs(&[1.0, 5.0]), true).unwrap();
        assert_eq!(st.names, vec!["s1"]);
        assert!(Standardizer::fit(&[&t], &obs(&[1.0, 4.0]), true).is_err());
    }

    #[test]
    fn permuted_observation_gives_same_result() {
        let t = random_table(200, 3, 9);
        let a = ObservedStats::new(vec!["s1".into(), "s2".into(), "s3".into()], vec![0.1, -0.5, 1.0])
            .unwrap();
        let b = ObservedStats::new(vec!["s3".into(), "s1".into(), "s2".into()], vec![1.0, 0.1, -0.5])
            .unwrap();
        let ra = retain(&t, &a, Retention::Count(20), true).unwrap();
        let rb = retain(&t, &b, Retention::Count(20), true).unwrap();
        assert_eq!(ra.indices, rb.indices);
        assert_eq!(ra.distances, rb.distances);
    }

    #[test]
    fn prune_keeps_everything_at_one() {
        let t = random_table(30, 4, 3);
        assert_eq!(prune_correlated(&t, &t.stat_columns(), 1.0), t.stat_columns());
    }

    #[test]
    fn prune_drops_duplicated_column() {
        let mut t = random_table(30, 2, 3);
        let dup = t.column(1);
        t.push_column("dup", &dup).unwrap();
        let kept = prune_correlated(&t, &t.stat_columns(), 0.99);
        assert_eq!(kept, vec![1, 2]);
    }

    #[test]
    fn prune_matches_correlation_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                vec![0.0, a, a + 0.1 * b, b, a * 0.3 + b]
            })
            .collect();
        let t = table(rows);
        let cols = t.stat_columns();
        // oracle: full correlation matrix, then greedy by hand
        let data: Vec<Vec<f64>> = cols.iter().map(|&c| t.column(c)).collect();
        let mut keep = Vec::new();
        for i in 0..cols.len() {
            if keep.iter().all(|&j: &usize| stats::pearson(&data[i], &data[j]).abs() <= 0.95) {
                keep.push(i);
            }
        }
        let expected: Vec<usize> = keep.iter().map(|&i| cols[i]).collect();
        assert_eq!(prune_correlated(&t, &cols, 0.95), expected);
        assert!(expected.len() < cols.len());
    }

    proptest! {
        #[test]
        fn distances_invariant_under_column_rescaling(seed in 0u64..1000, factor in 0.1f64..100.0, shift in -50f64..50.0) {
            let t = random_table(60, 3, seed);
            let o = obs(&[0.2, -0.4, 0.9]);
            let a = retain(&t, &o, Retention::Count(10), true).unwrap();
            let rows: Vec<Vec<f64>> = t.rows().map(|r| {
                let mut r = r.to_vec();
                r[2] = r[2] * factor + shift;
                r
            }).collect();
            let t2 = table(rows);
            let o2 = obs(&[0.2, -0.4 * factor + shift, 0.9]);
            let b = retain(&t2, &o2, Retention::Count(10), true).unwrap();
            prop_assert_eq!(&a.indices, &b.indices);
            for (x, y) in a.distances.iter().zip(&b.distances) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn smaller_retention_is_prefix(seed in 0u64..1000, k in 1usize..30) {
            let t = random_table(50, 2, seed);
            let o = obs(&[0.0, 0.5]);
            let small = retain(&t, &o, Retention::Count(k), true).unwrap();
            let big = retain(&t, &o, Retention::Count(k + 10), true).unwrap();
            prop_assert_eq!(&small.indices[..], &big.indices[..k]);
        }

        #[test]
        fn matches_brute_force_on_100_rows(seed in 0u64..10_000, k in 1usize..100) {
            let t = random_table(100, 3, seed);
            let o = obs(&[0.3, -1.0, 2.0]);
            let r = retain(&t, &o, Retention::Count(k), true).unwrap();
            let st = Standardizer::fit(&[&t], &o, true).unwrap();
            let mut all: Vec<(f64, usize)> = (0..100).map(|i| {
                let d: f64 = (0..3).map(|j| {
                    let z = (t.value(i, j + 1) - st.center[j]) / st.scale[j];
                    let zo = (o.values[j] - st.center[j]) / st.scale[j];
                    (z - zo).powi(2)
                }).sum();
                (d.sqrt(), i)
            }).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all[..k].iter().map(|x| x.1).collect();
            prop_assert_eq!(r.indices, expect);
        }
    }
}
