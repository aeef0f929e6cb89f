//! Model-choice validation: confusion matrix and calibration of posterior
//! model probabilities.

use rand::Rng;
use rand::seq::index;

use crate::choice::{PreparedModels, choose_many};
use crate::error::{Error, Result};
use crate::io::SimulationTable;

/// `counts[true][chosen]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(models: usize) -> Self {
        Self {
            counts: vec![vec![0; models]; models],
        }
    }

    pub fn row_total(&self, m: usize) -> usize {
        self.counts[m].iter().sum()
    }

    /// Fraction of pseudo-observations from model `m` assigned to `m`.
    pub fn accuracy(&self, m: usize) -> f64 {
        let t = self.row_total(m);
        if t == 0 {
            f64::NAN
        } else {
            self.counts[m][m] as f64 / t as f64
        }
    }

    /// Mean of the per-model accuracies.
    pub fn overall_accuracy(&self) -> f64 {
        let m = self.counts.len();
        (0..m).map(|i| self.accuracy(i)).sum::<f64>() / m as f64
    }

    /// Counts then fractions for each true model.
    pub fn to_table(&self) -> Result<SimulationTable> {
        let m = self.counts.len();
        let mut names = vec!["trueModel".to_string()];
        names.extend((0..m).map(|j| format!("count_model{j}")));
        names.extend((0..m).map(|j| format!("fraction_model{j}")));
        let rows = (0..m)
            .map(|i| {
                let t = self.row_total(i).max(1) as f64;
                let mut r = vec![i as f64];
                r.extend(self.counts[i].iter().map(|&c| c as f64));
                r.extend(self.counts[i].iter().map(|&c| c as f64 / t));
                r
            })
            .collect();
        SimulationTable::new(names, rows, Vec::new())
    }
}

#[derive(Debug, Clone)]
pub struct ModelChoiceValidation {
    pub true_model: Vec<usize>,
    /// Posterior model probabilities per pseudo-observation.
    pub probabilities: Vec<Vec<f64>>,
    pub confusion: ConfusionMatrix,
    pub failures: usize,
}

impl ModelChoiceValidation {
    /// True model index and the probability of each model, one row per
    /// pseudo-observation.
    pub fn to_table(&self) -> Result<SimulationTable> {
        let m = self.confusion.counts.len();
        let mut names = vec!["trueModel".to_string()];
        names.extend((0..m).map(|j| format!("p_model{j}")));
        let rows = self
            .true_model
            .iter()
            .zip(&self.probabilities)
            .map(|(&t, p)| {
                let mut r = vec![t as f64];
                r.extend(p);
                r
            })
            .collect();
        SimulationTable::new(names, rows, Vec::new())
    }
}

/// Draws `n_val` simulations from every model, runs model choice with each
/// as the observation (that simulation removed from the reference) and
/// tallies the preferred model.
pub fn model_choice_validate<R: Rng + ?Sized>(
    prep: &PreparedModels<'_>,
    n_val: usize,
    rng: &mut R,
) -> Result<ModelChoiceValidation> {
    let models = prep.num_models();
    let mut pseudo = Vec::with_capacity(models * n_val);
    for m in 0..models {
        let rows = prep.tables[m].nrows();
        if n_val == 0 || n_val > rows {
            return Err(Error::invalid(format!(
                "cannot draw {n_val} pseudo-observations from model {m} with {rows} simulations"
            )));
        }
        let mut idx = index::sample(rng, rows, n_val).into_vec();
        idx.sort_unstable();
        pseudo.extend(idx.into_iter().map(|r| (m, r)));
    }
    let results = choose_many(prep, &pseudo);
    let mut out = ModelChoiceValidation {
        true_model: Vec::new(),
        probabilities: Vec::new(),
        confusion: ConfusionMatrix::new(models),
        failures: 0,
    };
    for ((m, r), res) in pseudo.into_iter().zip(results) {
        match res {
            Ok(c) => {
                out.confusion.counts[m][c.best()] += 1;
                out.true_model.push(m);
                out.probabilities.push(c.probabilities);
            }
            Err(e) => {
                log::warn!("model choice for pseudo-observation {r} of model {m} failed: {e}");
                out.failures += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean posterior probability of the model within the bin.
    pub mean_p: f64,
    /// Fraction of the bin's pseudo-observations generated by the model;
    /// `None` for empty bins.
    pub p_empirical: Option<f64>,
}

/// Bins pseudo-observations by the posterior probability of `model` into
/// `n_bins` equal-width bins on [0, 1].
pub fn calibration_curve(v: &ModelChoiceValidation, model: usize, n_bins: usize) -> Vec<CalibrationBin> {
    assert!(n_bins > 0);
    let mut count = vec![0usize; n_bins];
    let mut sum_p = vec![0.0; n_bins];
    let mut hits = vec![0usize; n_bins];
    for (t, p) in v.true_model.iter().zip(&v.probabilities) {
        let x = p[model];
        let b = ((x * n_bins as f64).floor() as usize).min(n_bins - 1);
        count[b] += 1;
        sum_p[b] += x;
        if *t == model {
            hits[b] += 1;
        }
    }
    (0..n_bins)
        .map(|b| CalibrationBin {
            lower: b as f64 / n_bins as f64,
            upper: (b + 1) as f64 / n_bins as f64,
            count: count[b],
            mean_p: if count[b] > 0 { sum_p[b] / count[b] as f64 } else { f64::NAN },
            p_empirical: (count[b] > 0).then(|| hits[b] as f64 / count[b] as f64),
        })
        .collect()
}

pub fn calibration_table(bins: &[CalibrationBin]) -> Result<SimulationTable> {
    let names = ["lower", "upper", "count", "p_ABC", "p_empirical"].map(String::from).to_vec();
    let rows = bins
        .iter()
        .map(|b| {
            vec![
                b.lower,
                b.upper,
                b.count as f64,
                if b.count > 0 { b.mean_p } else { -1.0 },
                b.p_empirical.unwrap_or(-1.0),
            ]
        })
        .collect();
    SimulationTable::new(names, rows, Vec::new())
}
