//! Plain-text tables: simulation files, observed statistics and the tagged
//! estimation outputs.
//!
//! Reading accepts any run of tabs or spaces as separator. Writing always
//! uses a single tab and six significant digits.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};

/// Rows of named real-valued columns, some of which are model parameters.
///
/// Every column that is not a parameter is a candidate statistic; which of
/// them are used is decided later by matching against observed names.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTable {
    names: Vec<String>,
    data: Vec<f64>,
    params: Vec<usize>,
}

impl SimulationTable {
    /// Builds a table from row vectors. `params` are 0-based column indices.
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, params: Vec<usize>) -> Result<Self> {
        let ncols = names.len();
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {ncols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(names, data, params)
    }

    /// Builds a table from row-major data.
    pub fn from_flat(names: Vec<String>, data: Vec<f64>, params: Vec<usize>) -> Result<Self> {
        let ncols = names.len();
        if ncols == 0 {
            return Err(Error::invalid("table has no columns"));
        }
        if !data.len().is_multiple_of(ncols) {
            return Err(Error::invalid("ragged table data"));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {}, column `{}`",
                bad / ncols,
                names[bad % ncols]
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate column name `{a}`")));
            }
        }
        let mut params = params;
        params.sort_unstable();
        params.dedup();
        if let Some(&p) = params.iter().find(|&&p| p >= ncols) {
            return Err(Error::invalid(format!(
                "parameter column {} out of range (table has {ncols} columns)",
                p + 1
            )));
        }
        Ok(Self {
            names,
            data,
            params,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ncols();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols())
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.ncols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// 0-based indices of the parameter columns, ascending.
    pub fn param_columns(&self) -> &[usize] {
        &self.params
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|&i| self.names[i].as_str()).collect()
    }

    /// Every column that is not a parameter.
    pub fn stat_columns(&self) -> Vec<usize> {
        (0..self.ncols())
            .filter(|c| !self.params.contains(c))
            .collect()
    }

    /// Indices of the statistic columns named in `names`, in that order.
    pub fn stat_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .filter(|c| !self.params.contains(c))
                    .ok_or_else(|| Error::invalid(format!("statistic `{n}` not in simulation table")))
            })
            .collect()
    }

    /// A table containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.ncols());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            names: self.names.clone(),
            data,
            params: self.params.clone(),
        }
    }

    /// Copy of the table without row `skip`.
    pub fn without_row(&self, skip: usize) -> Self {
        let keep: Vec<usize> = (0..self.nrows()).filter(|&r| r != skip).collect();
        self.select_rows(&keep)
    }

    /// Parameters plus the named statistics, in that order.
    pub fn select_columns(&self, cols: &[usize], params: Vec<usize>) -> Result<Self> {
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        let mut data = Vec::with_capacity(self.nrows() * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Self::from_flat(names, data, params)
    }

    /// Appends a column.
    pub fn push_column(&mut self, name: impl Into<String>, values: &[f64]) -> Result<()> {
        let name = name.into();
        if values.len() != self.nrows() {
            return Err(Error::invalid(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.nrows()
            )));
        }
        if self.column_index(&name).is_some() {
            return Err(Error::invalid(format!("duplicate column name `{name}`")));
        }
        let old = self.ncols();
        let mut data = Vec::with_capacity(self.data.len() + values.len());
        for (r, v) in self.data.chunks_exact(old).zip(values) {
            data.extend_from_slice(r);
            data.push(*v);
        }
        self.names.push(name);
        self.data = data;
        Ok(())
    }

    /// Appends rows of another table with identical columns.
    pub fn extend(&mut self, other: &SimulationTable) -> Result<()> {
        if other.names != self.names {
            return Err(Error::invalid("cannot append tables with different columns"));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }
}

/// One observed statistic vector, matched to simulations by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStats {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ObservedStats {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} statistic names but {} values",
                names.len(),
                values.len()
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate statistic name `{a}`")));
            }
        }
        Ok(Self { names, values })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    /// Values reordered to follow `names`.
    pub fn values_for(&self, names: &[String]) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| {
                self.get(n)
                    .ok_or_else(|| Error::invalid(format!("observed statistic `{n}` missing")))
            })
            .collect()
    }

    /// The row of a table viewed as an observation over the given columns.
    pub fn from_row(table: &SimulationTable, row: usize, cols: &[usize]) -> Self {
        Self {
            names: cols.iter().map(|&c| table.names()[c].clone()).collect(),
            values: cols.iter().map(|&c| table.value(row, c)).collect(),
        }
    }
}

/// Output file tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputTag {
    BestSimsParamStats,
    MarginalPosteriorDensities,
    MarginalPosteriorCharacteristics,
    /// 1-based parameter indices of the joint grid.
    JointPosterior(Vec<usize>),
    ModelFit,
    /// Marginal-density and Tukey P-values of the observation.
    FitPValues,
    RandomValidation,
    RetainedValidation,
    ModelChoiceValidation,
    ConfusionMatrix,
    SearchStatsGreedySearch,
}

impl fmt::Display for OutputTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutputTag::BestSimsParamStats => "BestSimsParamStats",
            OutputTag::MarginalPosteriorDensities => "MarginalPosteriorDensities",
            OutputTag::MarginalPosteriorCharacteristics => "MarginalPosteriorCharacteristics",
            OutputTag::JointPosterior(idx) => {
                f.write_str("jointPosterior")?;
                for i in idx {
                    write!(f, "_{i}")?;
                }
                return Ok(());
            }
            OutputTag::ModelFit => "modelFit",
            OutputTag::FitPValues => "modelFitPValues",
            OutputTag::RandomValidation => "RandomValidation",
            OutputTag::RetainedValidation => "RetainedValidation",
            OutputTag::ModelChoiceValidation => "modelChoiceValidation",
            OutputTag::ConfusionMatrix => "confusionMatrix",
            OutputTag::SearchStatsGreedySearch => "searchStatsgreedySearch",
        };
        f.write_str(s)
    }
}

/// `<prefix>_model<m>_<tag>_Obs<k>.txt`, omitting the parts that are `None`.
pub fn tagged_path(
    prefix: &str,
    model: Option<usize>,
    tag: &OutputTag,
    obs: Option<usize>,
) -> PathBuf {
    let mut name = prefix.to_string();
    if let Some(m) = model {
        name.push_str(&format!("_model{m}"));
    }
    name.push_str(&format!("_{tag}"));
    if let Some(o) = obs {
        name.push_str(&format!("_Obs{o}"));
    }
    name.push_str(".txt");
    PathBuf::from(name)
}

/// Writes `payload` to its tagged file name and returns the path.
pub fn write_tagged(
    prefix: &str,
    model: Option<usize>,
    tag: &OutputTag,
    obs: Option<usize>,
    payload: &SimulationTable,
) -> Result<PathBuf> {
    if payload.is_empty() {
        return Err(Error::invalid(format!("refusing to write empty `{tag}` output")));
    }
    let path = tagged_path(prefix, model, tag, obs);
    write_table(&path, payload)?;
    Ok(path)
}

/// Writes a header line and tab-separated rows.
pub fn write_table(path: &Path, table: &SimulationTable) -> Result<()> {
    let mut out = String::with_capacity(table.nrows() * table.ncols() * 10);
    out.push_str(&table.names().join("\t"));
    out.push('\n');
    for row in table.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_number(v)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    write_text(path, &out)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Six significant digits; scientific notation below 1e-4 and from 1e6 on.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a 1-based column expression such as `1-2`, `3` or `1-2,5`.
pub fn parse_column_spec(spec: &str) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (part, part),
        };
        let lo: usize = lo
            .parse()
            .map_err(|_| Error::Config(format!("bad column range `{part}`")))?;
        let hi: usize = hi
            .parse()
            .map_err(|_| Error::Config(format!("bad column range `{part}`")))?;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("empty or invalid column range `{part}`")));
        }
        cols.extend(lo - 1..hi);
    }
    if cols.is_empty() {
        return Err(Error::Config(format!("empty parameter column spec `{spec}`")));
    }
    cols.sort_unstable();
    cols.dedup();
    Ok(cols)
}

fn read_lines(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split([' ', '\t']).filter(|s| !s.is_empty())
}

/// Reads a simulation file; `param_spec` selects the parameter columns.
pub fn read_table(path: &Path, param_spec: &str) -> Result<SimulationTable> {
    read_table_limited(path, Some(param_spec), None)
}

/// Reads at most `max_rows` data rows. Without a `param_spec` the table has
/// no parameter columns.
///
/// Rows whose values parse but are not finite are skipped with a counted
/// warning; unparseable cells are errors.
pub fn read_table_limited(
    path: &Path,
    param_spec: Option<&str>,
    max_rows: Option<usize>,
) -> Result<SimulationTable> {
    let text = read_lines(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::table(path, 1, "missing header line"))?;
    let names: Vec<String> = split_fields(header).map(|s| s.trim_matches('"').to_string()).collect();
    if names.is_empty() {
        return Err(Error::table(path, 1, "empty header"));
    }
    if let Some(f) = names.iter().find(|n| n.parse::<f64>().is_ok()) {
        return Err(Error::table(path, 1, format!("header field `{f}` is numeric")));
    }
    let params = match param_spec {
        Some(spec) => parse_column_spec(spec)?,
        None => Vec::new(),
    };
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut skipped = 0usize;
    for (idx, line) in lines {
        if max_rows.is_some_and(|m| rows >= m) {
            break;
        }
        let mut row = Vec::with_capacity(names.len());
        for cell in split_fields(line) {
            let v: f64 = cell.parse().map_err(|_| {
                Error::table(path, idx + 1, format!("non-numeric cell `{cell}`"))
            })?;
            row.push(v);
        }
        if row.len() != names.len() {
            return Err(Error::table(
                path,
                idx + 1,
                format!("{} values for {} columns", row.len(), names.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            skipped += 1;
            continue;
        }
        data.extend(row);
        rows += 1;
    }
    if skipped > 0 {
        warn!("{}: rejected {skipped} rows with non-finite values", path.display());
    }
    SimulationTable::from_flat(names, data, params).map_err(|e| match e {
        Error::InvalidInput(m) => Error::table(path, 1, m),
        other => other,
    })
}

/// Reads an observed-statistics file: one header line, one observation per
/// following line.
pub fn read_observed(path: &Path) -> Result<Vec<ObservedStats>> {
    let text = read_lines(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::table(path, 1, "missing header line"))?;
    let names: Vec<String> = split_fields(header).map(str::to_string).collect();
    let mut out = Vec::new();
    for (idx, line) in lines {
        let values = split_fields(line)
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::table(path, idx + 1, format!("non-numeric cell `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != names.len() {
            return Err(Error::table(
                path,
                idx + 1,
                format!("{} values for {} statistic names", values.len(), names.len()),
            ));
        }
        out.push(ObservedStats::new(names.clone(), values).map_err(|e| {
            Error::table(path, idx + 1, e.to_string())
        })?);
    }
    if out.is_empty() {
        return Err(Error::table(path, 2, "no observed values after the header"));
    }
    Ok(out)
}

/// Writes observations in the same layout `read_observed` accepts.
pub fn write_observed(path: &Path, obs: &[ObservedStats]) -> Result<()> {
    let first = obs
        .first()
        .ok_or_else(|| Error::invalid("no observations to write"))?;
    let mut out = first.names.join("\t");
    out.push('\n');
    for o in obs {
        let cells: Vec<String> = o.values.iter().map(|&v| format_number(v)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    write_text(path, &out)
}
