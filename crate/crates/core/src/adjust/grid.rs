//! Posterior densities tabulated on regular grids, with quantiles and
//! highest-density levels.

use crate::error::Result;
use crate::io::SimulationTable;

/// Trapezoid integral of equally spaced samples.
pub fn trapezoid(y: &[f64], step: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => step * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1])),
    }
}

fn trapezoid_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if n > 1 {
        w[0] = 0.5;
        w[n - 1] = 0.5;
    }
    w
}

/// `points` equally spaced values from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Probability of the cells strictly denser than `d`, plus half the mass of
/// cells exactly at `d`.
fn superlevel_mass(sorted_desc: &[(f64, f64)], cumulative: &[f64], d: f64) -> f64 {
    // sorted_desc: (density, mass) by descending density
    let tol = 1e-12 * d.abs();
    let above = sorted_desc.partition_point(|x| x.0 > d + tol);
    let equal_end = sorted_desc.partition_point(|x| x.0 >= d - tol);
    let base = if above == 0 { 0.0 } else { cumulative[above - 1] };
    let tie: f64 = sorted_desc[above..equal_end].iter().map(|x| x.1).sum();
    (base + 0.5 * tie).min(1.0)
}

fn sorted_masses(density: &[f64], mass: &[f64]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut v: Vec<(f64, f64)> = density.iter().copied().zip(mass.iter().copied()).collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = 0.0;
    let cum = v
        .iter()
        .map(|x| {
            acc += x.1;
            acc
        })
        .collect();
    (v, cum)
}

/// Marginal posterior of one parameter on an equally spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    pub name: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    sorted: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl GridPosterior {
    /// Normalizes `density` so its trapezoid integral over `grid` is one.
    /// A density that vanishes everywhere becomes uniform.
    pub fn new(name: impl Into<String>, grid: Vec<f64>, mut density: Vec<f64>) -> Self {
        assert!(grid.len() >= 2 && grid.len() == density.len());
        let step = grid[1] - grid[0];
        let area = trapezoid(&density, step);
        if area > 0.0 && area.is_finite() {
            density.iter_mut().for_each(|d| *d /= area);
        } else {
            let u = 1.0 / (grid[grid.len() - 1] - grid[0]);
            density.iter_mut().for_each(|d| *d = u);
        }
        let mass: Vec<f64> = trapezoid_weights(grid.len())
            .iter()
            .zip(&density)
            .map(|(w, d)| w * d * step)
            .collect();
        let (sorted, cumulative) = sorted_masses(&density, &mass);
        Self {
            name: name.into(),
            grid,
            density,
            sorted,
            cumulative,
        }
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    fn cell_of(&self, x: f64) -> Option<(usize, f64)> {
        let lo = self.grid[0];
        let hi = self.grid[self.grid.len() - 1];
        if !(x >= lo && x <= hi) {
            return None;
        }
        let h = self.step();
        let i = (((x - lo) / h).floor() as usize).min(self.grid.len() - 2);
        Some((i, x - self.grid[i]))
    }

    /// Linear interpolation; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        match self.cell_of(x) {
            None => 0.0,
            Some((i, t)) => {
                let (a, b) = (self.density[i], self.density[i + 1]);
                a + (b - a) * t / self.step()
            }
        }
    }

    fn cumulative_at_nodes(&self) -> Vec<f64> {
        let h = self.step();
        let mut c = vec![0.0; self.grid.len()];
        for i in 1..self.grid.len() {
            c[i] = c[i - 1] + 0.5 * h * (self.density[i - 1] + self.density[i]);
        }
        c
    }

    /// Posterior mass below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.grid[0] {
            return 0.0;
        }
        match self.cell_of(x) {
            None => 1.0,
            Some((i, t)) => {
                let c = self.cumulative_at_nodes();
                let a = self.density[i];
                let b = self.density[i + 1];
                (c[i] + a * t + (b - a) * t * t / (2.0 * self.step())).clamp(0.0, 1.0)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let c = self.cumulative_at_nodes();
        let h = self.step();
        let n = self.grid.len();
        let p = p.clamp(0.0, 1.0);
        let i = c.partition_point(|&v| v < p).clamp(1, n - 1) - 1;
        let r = p - c[i];
        let (a, b) = (self.density[i], self.density[i + 1]);
        let slope = (b - a) / h;
        let t = if slope.abs() < 1e-12 * a.max(1e-300) || slope == 0.0 {
            if a > 0.0 { r / a } else { 0.0 }
        } else {
            let disc = (a * a + 2.0 * slope * r).max(0.0);
            (-a + disc.sqrt()) / slope
        };
        self.grid[i] + t.clamp(0.0, h)
    }

    pub fn mean(&self) -> f64 {
        let xf: Vec<f64> = self.grid.iter().zip(&self.density).map(|(x, f)| x * f).collect();
        trapezoid(&xf, self.step())
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let v: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(x, f)| (x - m).powi(2) * f)
            .collect();
        trapezoid(&v, self.step()).max(0.0).sqrt()
    }

    /// Grid point of maximal density (first on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for i in 1..self.density.len() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }

    /// Mass of the smallest highest-density region containing `x`; 1 outside
    /// the grid.
    pub fn hdi_level(&self, x: f64) -> f64 {
        if self.cell_of(x).is_none() {
            return 1.0;
        }
        superlevel_mass(&self.sorted, &self.cumulative, self.density_at(x))
    }

    /// Envelope of the grid points in the highest-density region of mass
    /// `level`.
    pub fn hdi_bounds(&self, level: f64) -> (f64, f64) {
        let cutoff = self
            .cumulative
            .iter()
            .position(|&c| c >= level - 1e-12)
            .unwrap_or(self.sorted.len() - 1);
        let dmin = self.sorted[cutoff].0;
        let inside: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .filter(|(_, &d)| d >= dmin)
            .map(|(x, _)| *x)
            .collect();
        (inside[0], inside[inside.len() - 1])
    }

    pub fn characteristics(&self) -> PosteriorCharacteristics {
        PosteriorCharacteristics {
            name: self.name.clone(),
            mode: self.mode(),
            mean: self.mean(),
            median: self.quantile(0.5),
            quantiles: QUANTILE_LEVELS.map(|p| self.quantile(p)),
            hdi50: self.hdi_bounds(0.5),
            hdi95: self.hdi_bounds(0.95),
        }
    }
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCharacteristics {
    pub name: String,
    pub mode: f64,
    pub mean: f64,
    pub median: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
    pub hdi50: (f64, f64),
    pub hdi95: (f64, f64),
}

impl PosteriorCharacteristics {
    pub const HEADER: [&'static str; 13] = [
        "name",
        "mode",
        "mean",
        "median",
        "q2.5",
        "q25",
        "q50",
        "q75",
        "q97.5",
        "HDI50_lower",
        "HDI50_upper",
        "HDI95_lower",
        "HDI95_upper",
    ];

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.mode, self.mean, self.median];
        v.extend(self.quantiles);
        v.extend([self.hdi50.0, self.hdi50.1, self.hdi95.0, self.hdi95.1]);
        v
    }
}

/// Marginal densities as `<param>` / `<param>.density` column pairs.
pub fn marginals_table(marginals: &[GridPosterior]) -> Result<SimulationTable> {
    let mut names = Vec::new();
    for m in marginals {
        names.push(m.name.clone());
        names.push(format!("{}.density", m.name));
    }
    let n = marginals.iter().map(|m| m.grid.len()).max().unwrap_or(0);
    let rows = (0..n)
        .map(|i| {
            marginals
                .iter()
                .flat_map(|m| [m.grid[i.min(m.grid.len() - 1)], m.density[i.min(m.grid.len() - 1)]])
                .collect()
        })
        .collect();
    SimulationTable::new(names, rows, Vec::new())
}

/// Joint posterior on a tensor grid; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGrid {
    pub names: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub density: Vec<f64>,
    /// Highest-density level of every grid point.
    pub hdi: Vec<f64>,
    mass: Vec<f64>,
}

impl JointGrid {
    pub fn new(names: Vec<String>, axes: Vec<Vec<f64>>, mut density: Vec<f64>) -> Self {
        let total: usize = axes.iter().map(Vec::len).product();
        assert_eq!(total, density.len());
        let tw: Vec<Vec<f64>> = axes
            .iter()
            .map(|a| {
                let step = a[1] - a[0];
                trapezoid_weights(a.len()).into_iter().map(|w| w * step).collect()
            })
            .collect();
        let mut mass = vec![0.0; total];
        for (flat, m) in mass.iter_mut().enumerate() {
            let mut rem = flat;
            let mut w = 1.0;
            for d in (0..axes.len()).rev() {
                let i = rem % axes[d].len();
                rem /= axes[d].len();
                w *= tw[d][i];
            }
            *m = w;
        }
        let area: f64 = density.iter().zip(&mass).map(|(d, m)| d * m).sum();
        if area > 0.0 && area.is_finite() {
            density.iter_mut().for_each(|d| *d /= area);
        }
        let cell_mass: Vec<f64> = density.iter().zip(&mass).map(|(d, m)| d * m).collect();
        let (sorted, cum) = sorted_masses(&density, &cell_mass);
        let hdi = density
            .iter()
            .map(|&d| superlevel_mass(&sorted, &cum, d))
            .collect();
        Self {
            names,
            axes,
            density,
            hdi,
            mass: cell_mass,
        }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut p = vec![0.0; self.axes.len()];
        for d in (0..self.axes.len()).rev() {
            let n = self.axes[d].len();
            p[d] = self.axes[d][rem % n];
            rem /= n;
        }
        p
    }

    /// Probability of the cells whose HDI level is at most `level`.
    pub fn mass_within(&self, level: f64) -> f64 {
        self.hdi
            .iter()
            .zip(&self.mass)
            .filter(|(h, _)| **h <= level)
            .map(|(_, m)| m)
            .sum()
    }

    /// Probability of each cell (sums to one).
    pub fn cell_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn to_table(&self) -> Result<SimulationTable> {
        let mut names = self.names.clone();
        names.push("density".into());
        names.push("HDI".into());
        let rows = (0..self.len())
            .map(|i| {
                let mut r = self.point(i);
                r.push(self.density[i]);
                r.push(self.hdi[i]);
                r
            })
            .collect();
        SimulationTable::new(names, rows, (0..self.names.len()).collect())
    }
}
