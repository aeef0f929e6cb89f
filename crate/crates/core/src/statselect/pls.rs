//! Partial least squares by NIPALS, the linear-combination definition file
//! and the transform it drives.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::boxcox::{BoxCox, fit_boxcox};
use crate::error::{Error, Result};
use crate::io::{ObservedStats, SimulationTable, format_number};

const MAX_ITER: usize = 1000;
const TOL: f64 = 1e-13;

/// NIPALS components of centered `x` (n × p) against centered `y` (n × q).
#[derive(Debug, Clone)]
pub struct Nipals {
    /// Weights (p × a).
    pub w: DMatrix<f64>,
    /// X loadings (p × a).
    pub p: DMatrix<f64>,
    /// Y loadings (q × a).
    pub c: DMatrix<f64>,
    /// Projection `W (P'W)^-1`; scores are `x R`.
    pub r: DMatrix<f64>,
    /// Training scores (n × a).
    pub t: DMatrix<f64>,
}

impl Nipals {
    pub fn ncomp(&self) -> usize {
        self.w.ncols()
    }

    /// `x R_a C_a'` using the first `a` components; `x` must be centered
    /// like the training data.
    pub fn predict(&self, x: &DMatrix<f64>, a: usize) -> DMatrix<f64> {
        let r = self.r.columns(0, a);
        let c = self.c.columns(0, a);
        x * r * c.transpose()
    }
}

/// Multi-response NIPALS with deflation. Each component's largest
/// projection entry (by magnitude) is made positive.
pub fn nipals(x: &DMatrix<f64>, y: &DMatrix<f64>, ncomp: usize) -> Result<Nipals> {
    let (n, p) = x.shape();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(Error::invalid("PLS: X and Y row counts differ"));
    }
    if ncomp == 0 || ncomp > p.min(n.saturating_sub(1)) {
        return Err(Error::invalid(format!(
            "PLS: cannot extract {ncomp} components from {n} rows and {p} statistics"
        )));
    }
    let mut xd = x.clone();
    let mut yd = y.clone();
    let mut w = DMatrix::zeros(p, ncomp);
    let mut pl = DMatrix::zeros(p, ncomp);
    let mut c = DMatrix::zeros(q, ncomp);
    let mut t = DMatrix::zeros(n, ncomp);
    for a in 0..ncomp {
        let start = (0..q)
            .max_by(|&i, &j| yd.column(i).norm_squared().total_cmp(&yd.column(j).norm_squared()))
            .unwrap_or(0);
        let mut u: DVector<f64> = yd.column(start).into_owned();
        let mut ta = DVector::<f64>::zeros(n);
        let mut wa = DVector::<f64>::zeros(p);
        let mut ca = DVector::<f64>::zeros(q);
        for _ in 0..MAX_ITER {
            wa = xd.transpose() * &u;
            let norm = wa.norm();
            if !(norm > 0.0) {
                return Err(Error::Numerical(format!(
                    "PLS component {} has no covariance with the parameters",
                    a + 1
                )));
            }
            wa /= norm;
            let t_new = &xd * &wa;
            let tt = t_new.norm_squared();
            ca = yd.transpose() * &t_new / tt;
            u = &yd * &ca / ca.norm_squared().max(f64::MIN_POSITIVE);
            let delta = (&t_new - &ta).norm() / t_new.norm().max(f64::MIN_POSITIVE);
            ta = t_new;
            if q == 1 || delta < TOL {
                break;
            }
        }
        let tt = ta.norm_squared();
        let pa = xd.transpose() * &ta / tt;
        xd -= &ta * pa.transpose();
        yd -= &ta * ca.transpose();
        w.set_column(a, &wa);
        pl.set_column(a, &pa);
        c.set_column(a, &ca);
        t.set_column(a, &ta);
    }
    let ptw = pl.transpose() * &w;
    let inv = ptw
        .try_inverse()
        .ok_or_else(|| Error::Numerical("PLS: P'W is singular".into()))?;
    let mut r = &w * inv;
    for a in 0..ncomp {
        let col = r.column(a);
        let big = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if big < 0.0 {
            for m in [&mut r, &mut w, &mut pl, &mut c, &mut t] {
                m.column_mut(a).neg_mut();
            }
        }
    }
    Ok(Nipals { w, p: pl, c, r, t })
}

/// Box-Cox settings and projection for every statistic, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombDef {
    pub names: Vec<String>,
    pub boxcox: Vec<BoxCox>,
    /// Statistics × components.
    pub loadings: DMatrix<f64>,
}

pub fn combination_name(i: usize) -> String {
    format!("LinearCombination_{i}")
}

impl LinearCombDef {
    pub fn new(names: Vec<String>, boxcox: Vec<BoxCox>, loadings: DMatrix<f64>) -> Result<Self> {
        if names.is_empty() || boxcox.len() != names.len() || loadings.nrows() != names.len() {
            return Err(Error::invalid("linear-combination definition is inconsistent"));
        }
        if loadings.ncols() == 0 {
            return Err(Error::invalid("linear-combination definition has no components"));
        }
        Ok(Self {
            names,
            boxcox,
            loadings,
        })
    }

    pub fn num_components(&self) -> usize {
        self.loadings.ncols()
    }

    /// One row per statistic: name, max, min, lambda, GM, mean, sd, then
    /// the loadings.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::table(path, line, msg))
    }

    fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut names = Vec::new();
        let mut boxcox = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() < 8 {
                return Err((i + 1, "expected a name, six Box-Cox numbers and at least one loading".into()));
            }
            let nums = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| (i + 1, format!("`{f}` is not a number"))))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if let Some(k) = rows.first().map(Vec::len) {
                if nums.len() - 6 != k {
                    return Err((i + 1, format!("expected {k} loadings, found {}", nums.len() - 6)));
                }
            }
            let bc = BoxCox {
                max: nums[0],
                min: nums[1],
                lambda: nums[2],
                gm: nums[3],
                mean: nums[4],
                sd: nums[5],
            };
            if !(bc.max > bc.min) || !(bc.sd > 0.0) || !(bc.gm > 0.0) {
                return Err((i + 1, format!("invalid Box-Cox settings for `{}`", fields[0])));
            }
            names.push(fields[0].to_string());
            boxcox.push(bc);
            rows.push(nums[6..].to_vec());
        }
        if rows.is_empty() {
            return Err((1, "empty linear-combination file".into()));
        }
        let k = rows[0].len();
        let loadings = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        Self::new(names, boxcox, loadings).map_err(|e| (1, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for (i, name) in self.names.iter().enumerate() {
            let bc = &self.boxcox[i];
            s.push_str(name);
            for v in [bc.max, bc.min, bc.lambda, bc.gm, bc.mean, bc.sd] {
                write!(s, " {}", format_number(v)).unwrap();
            }
            for v in self.loadings.row(i).iter() {
                write!(s, " {}", format_number(*v)).unwrap();
            }
            s.push('\n');
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.num_components() {
            return Err(Error::invalid(format!(
                "numLinearComb must be in 1..={}, got {k}",
                self.num_components()
            )));
        }
        Ok(())
    }

    /// Box-Cox then projection for one statistic vector in def order.
    /// `row` is only used for error messages.
    pub fn apply(&self, values: &[f64], k: usize, row: usize) -> Result<Vec<f64>> {
        let mut z = Vec::with_capacity(values.len());
        for (i, &x) in values.iter().enumerate() {
            z.push(self.boxcox[i].try_apply(x).ok_or_else(|| {
                Error::invalid(format!(
                    "value {x} of statistic `{}` in row {} is outside the Box-Cox domain",
                    self.names[i],
                    row + 1
                ))
            })?);
        }
        self.project(&z, k)
    }

    /// Projection onto the first `k` components without Box-Cox.
    pub fn project(&self, values: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_k(k)?;
        if values.len() != self.names.len() {
            return Err(Error::invalid(format!(
                "expected {} statistics, got {}",
                self.names.len(),
                values.len()
            )));
        }
        Ok((0..k)
            .map(|j| values.iter().zip(self.loadings.column(j).iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Columns not named in the definition pass through, followed by
    /// `LinearCombination_1..k`.
    pub fn transform_table(&self, table: &SimulationTable, k: usize) -> Result<SimulationTable> {
        self.check_k(k)?;
        let cols = self
            .names
            .iter()
            .map(|n| {
                table
                    .column_index(n)
                    .ok_or_else(|| Error::invalid(format!("statistic `{n}` missing from input")))
            })
            .collect::<Result<Vec<_>>>()?;
        let keep: Vec<usize> = (0..table.ncols()).filter(|c| !cols.contains(c)).collect();
        let params: Vec<usize> = keep
            .iter()
            .enumerate()
            .filter(|(_, c)| table.param_columns().contains(c))
            .map(|(i, _)| i)
            .collect();
        let mut names: Vec<String> = keep.iter().map(|&c| table.names()[c].clone()).collect();
        names.extend((1..=k).map(combination_name));
        let mut data = Vec::with_capacity(table.nrows() * names.len());
        let mut buf = vec![0.0; cols.len()];
        for (r, row) in table.rows().enumerate() {
            data.extend(keep.iter().map(|&c| row[c]));
            for (b, &c) in buf.iter_mut().zip(&cols) {
                *b = row[c];
            }
            data.extend(self.apply(&buf, k, r)?);
        }
        SimulationTable::from_flat(names, data, params)
    }

    pub fn transform_observed(&self, obs: &ObservedStats, k: usize) -> Result<ObservedStats> {
        self.check_k(k)?;
        let values = obs.values_for(&self.names)?;
        let mut names: Vec<String> = Vec::new();
        let mut out = Vec::new();
        for (n, v) in obs.names.iter().zip(&obs.values) {
            if !self.names.contains(n) {
                names.push(n.clone());
                out.push(*v);
            }
        }
        names.extend((1..=k).map(combination_name));
        out.extend(self.apply(&values, k, 0)?);
        ObservedStats::new(names, out)
    }
}

/// A fitted definition with its cross-validated prediction error.
#[derive(Debug, Clone)]
pub struct PlsFit {
    pub def: LinearCombDef,
    pub param_names: Vec<String>,
    /// `rmsep[a][j]`: error for parameter `j` with `a` components
    /// (`a = 0` predicts the training mean).
    pub rmsep: Vec<Vec<f64>>,
    pub recommended: usize,
}

impl PlsFit {
    pub fn rmsep_table(&self) -> Result<SimulationTable> {
        let mut names = vec!["components".to_string()];
        names.extend(self.param_names.iter().cloned());
        let rows = self
            .rmsep
            .iter()
            .enumerate()
            .map(|(a, r)| {
                let mut v = vec![a as f64];
                v.extend(r);
                v
            })
            .collect();
        SimulationTable::new(names, rows, vec![])
    }
}

fn center_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = m.nrows() as f64;
    let mean = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n));
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (out, mean)
}

fn scale_columns(m: &mut DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut sd = DVector::zeros(m.ncols());
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let s = (col.norm_squared() / (n - 1) as f64).sqrt();
        if !(s > 0.0) {
            return Err(Error::invalid("PLS: a parameter is constant"));
        }
        col /= s;
        sd[j] = s;
    }
    Ok(sd)
}

/// Box-Cox every statistic, then NIPALS against the standardized
/// parameters with `k_max` components. RMSEP comes from `cv_folds`
/// contiguous folds.
pub fn fit_pls(table: &SimulationTable, k_max: usize, cv_folds: usize) -> Result<PlsFit> {
    let stat_cols = table.stat_columns();
    let params = table.param_columns().to_vec();
    let n = table.nrows();
    if params.is_empty() || stat_cols.is_empty() {
        return Err(Error::invalid("PLS needs at least one parameter and one statistic"));
    }
    if cv_folds < 2 || n <= k_max + cv_folds {
        return Err(Error::invalid(format!(
            "PLS needs more than {} rows for {k_max} components and {cv_folds} folds",
            k_max + cv_folds
        )));
    }
    let k_max = k_max.min(stat_cols.len());
    let mut boxcox = Vec::with_capacity(stat_cols.len());
    let mut z = DMatrix::zeros(n, stat_cols.len());
    for (j, &c) in stat_cols.iter().enumerate() {
        let col = table.column(c);
        let bc = fit_boxcox(&col)
            .map_err(|_| Error::invalid(format!("statistic `{}` is constant", table.names()[c])))?;
        for (i, &x) in col.iter().enumerate() {
            z[(i, j)] = bc.try_apply(x).expect("training values are inside the domain");
        }
        boxcox.push(bc);
    }
    let y = DMatrix::from_fn(n, params.len(), |i, j| table.value(i, params[j]));

    let (xc, _) = center_columns(&z);
    let (mut yc, _) = center_columns(&y);
    scale_columns(&mut yc)?;
    let full = nipals(&xc, &yc, k_max)?;
    let names: Vec<String> = stat_cols.iter().map(|&c| table.names()[c].clone()).collect();
    let def = LinearCombDef::new(names, boxcox, full.r.clone())?;

    let mut sse = vec![vec![0.0; params.len()]; k_max + 1];
    for f in 0..cv_folds {
        let lo = f * n / cv_folds;
        let hi = (f + 1) * n / cv_folds;
        let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
        let xt = z.select_rows(&train);
        let yt = y.select_rows(&train);
        let (xtc, xm) = center_columns(&xt);
        let (mut ytc, ym) = center_columns(&yt);
        let ysd = scale_columns(&mut ytc)?;
        let model = nipals(&xtc, &ytc, k_max)?;
        let test: Vec<usize> = (lo..hi).collect();
        let mut xv = z.select_rows(&test);
        for (j, mut col) in xv.column_iter_mut().enumerate() {
            col.add_scalar_mut(-xm[j]);
        }
        for (a, sse_a) in sse.iter_mut().enumerate() {
            let pred = if a == 0 {
                DMatrix::zeros(test.len(), params.len())
            } else {
                model.predict(&xv, a)
            };
            for (ti, &row) in test.iter().enumerate() {
                for j in 0..params.len() {
                    let yhat = ym[j] + ysd[j] * pred[(ti, j)];
                    sse_a[j] += (y[(row, j)] - yhat).powi(2);
                }
            }
        }
    }
    let rmsep: Vec<Vec<f64>> = sse
        .iter()
        .map(|r| r.iter().map(|s| (s / n as f64).sqrt()).collect())
        .collect();
    let recommended = recommend(&rmsep);
    Ok(PlsFit {
        def,
        param_names: params.iter().map(|&c| table.names()[c].clone()).collect(),
        rmsep,
        recommended,
    })
}

/// Fraction of the achievable RMSEP reduction a recommended component
/// count must capture for every parameter.
pub const SUFFICIENT_REDUCTION: f64 = 0.9;

/// Smallest component count (at least one) that captures
/// [`SUFFICIENT_REDUCTION`] of the drop from zero components to the curve
/// minimum, for every parameter.
pub fn recommend(rmsep: &[Vec<f64>]) -> usize {
    let q = rmsep.first().map_or(0, Vec::len);
    let best: Vec<f64> = (0..q)
        .map(|j| rmsep.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .collect();
    (1..rmsep.len())
        .find(|&a| {
            (0..q).all(|j| rmsep[a][j] - best[j] <= (1.0 - SUFFICIENT_REDUCTION) * (rmsep[0][j] - best[j]))
        })
        .unwrap_or(rmsep.len().saturating_sub(1))
}
