//! Site frequency spectra and the classic polymorphism statistics.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SFS_STAT_NAMES: [&str; 5] = ["sfs1", "S", "pi", "thita", "taj_D"];

/// Derived-allele counts indexed by class `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sfs {
    counts: Vec<f64>,
}

impl Sfs {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid("SFS needs at least two classes"));
        }
        if let Some(i) = counts.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid(format!(
                "SFS class {i} has invalid count {}",
                counts[i]
            )));
        }
        Ok(Self { counts })
    }

    /// Haploid sample size.
    pub fn n(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfsStats {
    pub sfs1: f64,
    pub segregating: f64,
    pub pi: f64,
    pub theta_w: f64,
    pub tajimas_d: f64,
}

impl SfsStats {
    pub fn to_array(self) -> [f64; 5] {
        [self.sfs1, self.segregating, self.pi, self.theta_w, self.tajimas_d]
    }
}

/// Singletons, segregating sites, pairwise diversity, Watterson's theta and
/// Tajima's D. Classes 0 and n are ignored; D is 0 when S <= 1.
pub fn sfs_stats(sfs: &Sfs) -> Result<SfsStats> {
    let n = sfs.n();
    if n < 4 {
        return Err(Error::invalid(format!("SFS sample size {n} is below 4")));
    }
    let c = sfs.counts();
    let nf = n as f64;
    let (mut sum, mut s, mut a1, mut a2) = (0.0, 0.0, 0.0, 0.0);
    for (i, &ci) in c.iter().enumerate().take(n).skip(1) {
        let i = i as f64;
        sum += i * (nf - i) * ci;
        s += ci;
        a1 += 1.0 / i;
        a2 += 1.0 / (i * i);
    }
    let pi = 2.0 * sum / (nf * (nf - 1.0));
    let theta_w = s / a1;
    let b1 = (nf + 1.0) / (3.0 * (nf - 1.0));
    let b2 = 2.0 * (nf * nf + nf + 3.0) / (9.0 * nf * (nf - 1.0));
    let c1 = b1 - 1.0 / a1;
    let c2 = b2 - (nf + 2.0) / (a1 * nf) + a2 / (a1 * a1);
    let e1 = c1 / a1;
    let e2 = c2 / (a1 * a1 + a2);
    let tajimas_d = if s > 1.0 {
        (pi - theta_w) / (e1 * s + e2 * s * (s - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SfsStats {
        sfs1: c[1],
        segregating: s,
        pi,
        theta_w,
        tajimas_d,
    })
}

/// Reads a derived-allele SFS file: the third line holds the class counts.
/// Non-numeric fields (labels, trailing separators) are skipped.
pub fn read_daf(path: &Path) -> Result<Sfs> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_daf(&text).map_err(|m| Error::table(path, 3, m))
}

fn parse_daf(text: &str) -> std::result::Result<Sfs, String> {
    let line = text
        .lines()
        .nth(2)
        .ok_or_else(|| "SFS file has fewer than three lines".to_string())?;
    let counts: Vec<f64> = line
        .split_whitespace()
        .filter_map(|t| t.parse::<f64>().ok())
        .collect();
    Sfs::new(counts).map_err(|e| e.to_string())
}

/// Writes an SFS in the three-line layout read by [`read_daf`].
pub fn write_daf(path: &Path, sfs: &Sfs) -> Result<()> {
    let header: Vec<String> = (0..=sfs.n()).map(|i| format!("d0_{i}")).collect();
    let counts: Vec<String> = sfs.counts().iter().map(|c| format!("{c}")).collect();
    let text = format!(
        "1 observations\n{}\t\n{}\t\n",
        header.join("\t"),
        counts.join("\t")
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table8() -> Sfs {
        let mut c = vec![0.0; 25];
        c[0] = 9906.0;
        c[1] = 7.0;
        c[2] = 5.0;
        c[3] = 2.0;
        c[5] = 1.0;
        c[6] = 1.0;
        c[9] = 1.0;
        c[24] = 77.0;
        Sfs::new(c).unwrap()
    }

    #[test]
    fn downsampled_synonymous_sfs() {
        let s = sfs_stats(&table8()).unwrap();
        assert_eq!(s.sfs1, 7.0);
        assert_eq!(s.segregating, 17.0);
        // sum i(n-i)c_i = 7*23 + 5*44 + 2*63 + 95 + 108 + 135 = 845
        assert!((s.pi - 1690.0 / 552.0).abs() < 1e-12);
        let a1: f64 = (1..24).map(|i| 1.0 / i as f64).sum();
        assert!((s.theta_w - 17.0 / a1).abs() < 1e-12);
        assert!((s.theta_w - 4.5525).abs() < 1e-4);
        assert!((s.tajimas_d + 1.17).abs() < 0.005);
    }

    #[test]
    fn monomorphic() {
        let mut c = vec![0.0; 11];
        c[0] = 100.0;
        c[10] = 3.0;
        let s = sfs_stats(&Sfs::new(c).unwrap()).unwrap();
        assert_eq!(s.to_array(), [0.0; 5]);
    }

    #[test]
    fn outer_classes_are_ignored() {
        let base = table8();
        let mut c = base.counts().to_vec();
        c[0] += 1e4;
        c[24] += 50.0;
        assert_eq!(sfs_stats(&base).unwrap(), sfs_stats(&Sfs::new(c).unwrap()).unwrap());
    }

    #[test]
    fn doubling_counts_doubles_diversity() {
        let a = sfs_stats(&table8()).unwrap();
        let c: Vec<f64> = table8().counts().iter().map(|x| 2.0 * x).collect();
        let b = sfs_stats(&Sfs::new(c).unwrap()).unwrap();
        assert!((b.segregating - 2.0 * a.segregating).abs() < 1e-12);
        assert!((b.pi - 2.0 * a.pi).abs() < 1e-12);
        assert!((b.theta_w - 2.0 * a.theta_w).abs() < 1e-12);
    }

    #[test]
    fn neutral_expectation_gives_small_d() {
        // c_i proportional to 1/i is the neutral expected spectrum
        let n = 30;
        let c: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { 100.0 / i as f64 })
            .collect();
        let s = sfs_stats(&Sfs::new(c).unwrap()).unwrap();
        assert!(s.segregating >= 50.0);
        assert!(s.tajimas_d.abs() < 0.3, "{}", s.tajimas_d);
    }

    #[test]
    fn errors() {
        assert!(Sfs::new(vec![1.0, -1.0, 2.0]).is_err());
        assert!(sfs_stats(&Sfs::new(vec![1.0, 2.0, 3.0]).unwrap()).is_err());
    }

    #[test]
    fn daf_round_trip_and_trailing_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x_DAFpop0.obs");
        write_daf(&p, &table8()).unwrap();
        let back = read_daf(&p).unwrap();
        assert_eq!(back, table8());
        assert_eq!(back.n(), 24);
        let text = "1 observations\nd0_0\td0_1\td0_2\td0_3\td0_4\n5\t1\t2\t0\t0\t\n";
        assert_eq!(parse_daf(text).unwrap().n(), 4);
        assert!(parse_daf("one\ntwo\n").is_err());
    }
}
