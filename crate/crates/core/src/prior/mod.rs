//! Prior definitions (the est file): parameter priors, rules constraining
//! joint draws, and complex parameters derived by expressions.

mod expr;
mod parse;

use std::sync::Arc;

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub use expr::{parse_expr, BinOp, Expr, Func};
pub use parse::parse_est;

#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    Uniform { min: f64, max: f64 },
    LogUniform { min: f64, max: f64 },
    /// Normal truncated to `[min, max]`.
    Normal { min: f64, max: f64, mean: f64, sd: f64 },
    Fixed(f64),
}

impl PriorKind {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            PriorKind::Uniform { min, max }
            | PriorKind::LogUniform { min, max }
            | PriorKind::Normal { min, max, .. } => Some((min, max)),
            PriorKind::Fixed(_) => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorKind::Uniform { min, max } => rng.random_range(min..max),
            PriorKind::LogUniform { min, max } => rng.random_range(min.ln()..max.ln()).exp(),
            PriorKind::Normal { min, max, mean, sd } => truncated_normal(rng, min, max, mean, sd),
            PriorKind::Fixed(v) => v,
        }
    }

    /// Log density up to the truncation constant of each kind (which is
    /// included, so ratios across kinds stay meaningful).
    pub fn ln_density(&self, x: f64) -> f64 {
        if let Some((lo, hi)) = self.bounds() {
            if x < lo || x > hi {
                return f64::NEG_INFINITY;
            }
        }
        match *self {
            PriorKind::Uniform { min, max } => -(max - min).ln(),
            PriorKind::LogUniform { min, max } => -x.ln() - (max / min).ln().ln(),
            PriorKind::Normal { min, max, mean, sd } => {
                let n = std_normal();
                let mass = n.cdf((max - mean) / sd) - n.cdf((min - mean) / sd);
                n.ln_pdf((x - mean) / sd) - sd.ln() - mass.ln()
            }
            PriorKind::Fixed(_) => 0.0,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Rejection from the untruncated normal while the window holds at least
/// 0.1% of the mass, inverse-CDF sampling inside the window otherwise.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, min: f64, max: f64, mean: f64, sd: f64) -> f64 {
    let n = std_normal();
    let (a, b) = ((min - mean) / sd, (max - mean) / sd);
    let (fa, fb) = (n.cdf(a), n.cdf(b));
    if fb - fa >= 1e-3 {
        loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            if (a..=b).contains(&z) {
                return mean + sd * z;
            }
        }
    }
    let u = rng.random_range(fa..=fb);
    let z = n.inverse_cdf(u).clamp(a, b);
    mean + sd * z
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub name: String,
    pub integer: bool,
    pub kind: PriorKind,
    pub output: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOp {
    Lt,
    Gt,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Name(String),
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub lhs: Operand,
    pub op: RuleOp,
    pub rhs: Operand,
}

impl Rule {
    fn holds(&self, draw: &ParamDraw) -> bool {
        let value = |o: &Operand| match o {
            Operand::Name(n) => draw.get(n).unwrap_or(f64::NAN),
            Operand::Const(c) => *c,
        };
        let (a, b) = (value(&self.lhs), value(&self.rhs));
        match self.op {
            RuleOp::Lt => a < b,
            RuleOp::Gt => a > b,
            RuleOp::Le => a <= b,
            RuleOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexParam {
    pub name: String,
    pub integer: bool,
    pub expr: Expr,
    pub output: bool,
}

/// A parsed est file. Evaluation order is declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct EstModel {
    pub priors: Vec<PriorSpec>,
    pub rules: Vec<Rule>,
    pub complex: Vec<ComplexParam>,
    names: Arc<[String]>,
}

/// Attempts per accepted draw before the rule system is declared degenerate.
const RULE_PROBE: usize = 10_000;

impl EstModel {
    pub fn new(priors: Vec<PriorSpec>, rules: Vec<Rule>, complex: Vec<ComplexParam>) -> Self {
        let names: Vec<String> = priors
            .iter()
            .map(|p| p.name.clone())
            .chain(complex.iter().map(|c| c.name.clone()))
            .collect();
        Self {
            priors,
            rules,
            complex,
            names: names.into(),
        }
    }

    /// Prior names followed by complex-parameter names.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Names of every output-flagged prior and complex parameter.
    pub fn output_names(&self) -> Vec<String> {
        self.output_mask()
            .into_iter()
            .zip(self.names.iter())
            .filter(|(keep, _)| *keep)
            .map(|(_, n)| n.clone())
            .collect()
    }

    fn output_mask(&self) -> Vec<bool> {
        self.priors
            .iter()
            .map(|p| p.output)
            .chain(self.complex.iter().map(|c| c.output))
            .collect()
    }

    /// Draws raw prior values without applying rules.
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.priors.iter().map(|p| p.kind.sample(rng)).collect()
    }

    /// Applies integer truncation and evaluates complex parameters.
    pub fn complete(&self, raw: &[f64]) -> Result<ParamDraw> {
        debug_assert_eq!(raw.len(), self.priors.len());
        let mut values: Vec<f64> = raw
            .iter()
            .zip(&self.priors)
            .map(|(&v, p)| if p.integer { v.trunc() } else { v })
            .collect();
        for c in &self.complex {
            let known = &values;
            let names = &self.names;
            let v = c.expr.eval(&|n| {
                names[..known.len()]
                    .iter()
                    .position(|m| m == n)
                    .map(|i| known[i])
            })?;
            values.push(if c.integer { v.trunc() } else { v });
        }
        Ok(ParamDraw {
            names: self.names.clone(),
            values,
            output: self.output_mask().into(),
        })
    }

    pub fn rules_hold(&self, draw: &ParamDraw) -> bool {
        self.rules.iter().all(|r| r.holds(draw))
    }

    /// Draws a full parameter vector from the prior conditioned on the rules
    /// (whole-draw rejection).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamDraw> {
        for _ in 0..RULE_PROBE * 100 {
            let draw = self.complete(&self.sample_raw(rng))?;
            if self.rules_hold(&draw) {
                return Ok(draw);
            }
        }
        Err(Error::invalid(
            "rules rejected every prior draw; the rule system is degenerate",
        ))
    }

    /// Fails when rules reject more than 99.9% of a probe of raw draws.
    pub fn probe_rules<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.rules.is_empty() {
            return Ok(1.0);
        }
        let mut accepted = 0usize;
        for _ in 0..RULE_PROBE {
            let draw = self.complete(&self.sample_raw(rng))?;
            if self.rules_hold(&draw) {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / RULE_PROBE as f64;
        if rate < 1e-3 {
            return Err(Error::invalid(format!(
                "rules accept only {accepted} of {RULE_PROBE} prior draws; check the [RULES] section"
            )));
        }
        Ok(rate)
    }

    /// Sum of prior log densities of the raw values.
    pub fn ln_prior(&self, raw: &[f64]) -> f64 {
        raw.iter()
            .zip(&self.priors)
            .map(|(&v, p)| p.kind.ln_density(v))
            .sum()
    }
}

/// One complete parameter vector: raw prior values then complex values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDraw {
    names: Arc<[String]>,
    values: Vec<f64>,
    output: Arc<[bool]>,
}

impl ParamDraw {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of the output-flagged names, in declaration order.
    pub fn output_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.output.iter())
            .filter_map(|(v, &keep)| keep.then_some(*v))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

/// Time of a size change in generations from its scaled value
/// `tau = t / (2 N_cur)`.
pub fn tau_to_generations(tau: f64, n_cur: f64) -> f64 {
    tau * 2.0 * n_cur
}
