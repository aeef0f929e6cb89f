//! A minimal coalescent with one instantaneous size change, enough to
//! produce site frequency spectra for the population-genetics example when
//! no external simulator is installed.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::models::sfs::Sfs;

/// Haploid population of `n_cur` genes that was `omega * n_cur` genes
/// before `t1` generations ago.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthModel {
    pub n_cur: f64,
    pub omega: f64,
    pub t1: f64,
    pub mutation_rate: f64,
    pub sample_size: usize,
    pub loci: usize,
    pub sites_per_locus: usize,
}

impl GrowthModel {
    pub fn new(n_cur: f64, omega: f64, t1: f64, mutation_rate: f64) -> Self {
        Self {
            n_cur,
            omega,
            t1,
            mutation_rate,
            sample_size: 24,
            loci: 10,
            sites_per_locus: 1000,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n_cur > 0.0
            && self.omega > 0.0
            && self.t1 >= 0.0
            && self.mutation_rate >= 0.0
            && self.n_cur.is_finite()
            && self.omega.is_finite()
            && self.t1.is_finite()
            && self.sample_size >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid growth model {self:?}")))
        }
    }
}

/// Waiting time until the next coalescence among `k` lineages, starting at
/// time `t`.
fn waiting_time<R: Rng + ?Sized>(m: &GrowthModel, k: usize, t: f64, rng: &mut R) -> f64 {
    let pairs = (k * (k - 1)) as f64 / 2.0;
    let e: f64 = Exp1.sample(rng);
    if t < m.t1 {
        let dt = e * m.n_cur / pairs;
        if t + dt < m.t1 {
            return dt;
        }
        let used = (m.t1 - t) * pairs / m.n_cur;
        (m.t1 - t) + (e - used) * m.n_cur * m.omega / pairs
    } else {
        e * m.n_cur * m.omega / pairs
    }
}

/// Total branch length subtending each number of descendants `1..n` for one
/// genealogy.
fn branch_lengths<R: Rng + ?Sized>(m: &GrowthModel, rng: &mut R) -> Vec<f64> {
    let n = m.sample_size;
    let mut lineages = vec![1usize; n];
    let mut lengths = vec![0.0; n];
    let mut t = 0.0;
    while lineages.len() > 1 {
        let k = lineages.len();
        let dt = waiting_time(m, k, t, rng);
        for &d in &lineages {
            lengths[d] += dt;
        }
        t += dt;
        let i = rng.random_range(0..k);
        let a = lineages.swap_remove(i);
        let j = rng.random_range(0..k - 1);
        lineages[j] += a;
    }
    lengths
}

/// Unfolded SFS over all loci under the infinite-sites model.
pub fn simulate_sfs<R: Rng + ?Sized>(m: &GrowthModel, rng: &mut R) -> Result<Sfs> {
    m.validate()?;
    let n = m.sample_size;
    let mut counts = vec![0.0; n + 1];
    let rate = m.mutation_rate * m.sites_per_locus as f64;
    for _ in 0..m.loci {
        let lengths = branch_lengths(m, rng);
        for (class, &len) in lengths.iter().enumerate().skip(1) {
            let lambda = rate * len;
            if lambda > 0.0 {
                let hits: f64 = Poisson::new(lambda)
                    .map_err(|e| Error::invalid(format!("mutation rate: {e}")))?
                    .sample(rng);
                counts[class] += hits;
            }
        }
    }
    let total = (m.loci * m.sites_per_locus) as f64;
    let poly: f64 = counts.iter().sum();
    counts[0] = (total - poly).max(0.0);
    Sfs::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sfs::sfs_stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_size_matches_neutral_expectations() {
        // E[S] = theta * a1 with theta = 2 N mu L for haploid N in our scaling
        // (pairs coalesce at rate 1/N so E[T_MRCA-tree length] = 2 N a1).
        let mut m = GrowthModel::new(1000.0, 1.0, 0.0, 1e-5);
        m.loci = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sfs = simulate_sfs(&m, &mut rng).unwrap();
        let s = sfs_stats(&sfs).unwrap();
        let a1: f64 = (1..24).map(|i| 1.0 / i as f64).sum();
        let expected = 2.0 * 1000.0 * 1e-5 * 1000.0 * 400.0 * a1;
        assert!((s.segregating - expected).abs() < 0.1 * expected, "{} vs {}", s.segregating, expected);
        assert!(s.tajimas_d.abs() < 0.5);
        assert_eq!(sfs.counts().iter().sum::<f64>(), 400_000.0);
    }

    #[test]
    fn recent_expansion_makes_d_negative() {
        let mut m = GrowthModel::new(100_000.0, 0.01, 2000.0, 1e-7);
        m.loci = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sfs_stats(&simulate_sfs(&m, &mut rng).unwrap()).unwrap();
        assert!(s.tajimas_d < -0.5, "{}", s.tajimas_d);
    }

    #[test]
    fn seeded_reproducibility() {
        let m = GrowthModel::new(5000.0, 2.0, 100.0, 2.5e-8);
        let a = simulate_sfs(&m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_sfs(&m, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(simulate_sfs(&GrowthModel::new(-1.0, 1.0, 0.0, 0.0), &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }
}
