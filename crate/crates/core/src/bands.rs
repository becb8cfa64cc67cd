//! Band tables: per-k energies with provenance and trial statistics.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tightbinding::{KPoint, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Optimized,
    QpeRefined,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Optimized => "optimized",
            Provenance::QpeRefined => "qpe-refined",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Provenance::Exact),
            "optimized" => Ok(Provenance::Optimized),
            "qpe-refined" => Ok(Provenance::QpeRefined),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// Summary of repeated trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
}

impl TrialStats {
    /// Quartiles use linear interpolation between order statistics.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Self {
            n: s.len(),
            median: quantile(&s, 0.5),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            q1: quantile(&s, 0.25),
            q3: quantile(&s, 0.75),
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    sorted[lo] * (1.0 - f) + sorted[hi] * f
}

pub fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    quantile(&s, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEnergy {
    pub value: f64,
    pub provenance: Provenance,
    pub stats: Option<TrialStats>,
}

impl BandEnergy {
    pub fn plain(value: f64, provenance: Provenance) -> Self {
        Self {
            value,
            provenance,
            stats: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub k_index: usize,
    pub distance: f64,
    pub k: Vec3,
    pub label: Option<String>,
    /// `None` marks a k-point whose evaluation failed.
    pub energies: Option<Vec<BandEnergy>>,
    pub error: Option<String>,
}

impl BandRow {
    pub fn new(k_index: usize, point: &KPoint, energies: Vec<BandEnergy>) -> Self {
        Self {
            k_index,
            distance: point.distance,
            k: point.k,
            label: point.label.clone(),
            energies: Some(energies),
            error: None,
        }
    }

    pub fn failed(k_index: usize, point: &KPoint, error: String) -> Self {
        Self {
            k_index,
            distance: point.distance,
            k: point.k,
            label: point.label.clone(),
            energies: None,
            error: Some(error),
        }
    }

    pub fn values(&self) -> Option<Vec<f64>> {
        self.energies.as_ref().map(|e| e.iter().map(|b| b.value).collect())
    }

    fn method(&self) -> &'static str {
        match &self.energies {
            None => "failed",
            Some(e) => {
                let first = e.first().map(|b| b.provenance);
                if e.iter().all(|b| Some(b.provenance) == first) {
                    first.map_or("exact", |p| p.as_str())
                } else {
                    "mixed"
                }
            }
        }
    }
}

/// Energies of `n_bands` bands along a k-path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    pub n_bands: usize,
    pub rows: Vec<BandRow>,
}

impl BandTable {
    pub fn new(n_bands: usize, rows: Vec<BandRow>) -> Self {
        Self { n_bands, rows }
    }

    /// CSV with columns `k_index,path_distance,kx,ky,kz,E_0..E_{M-1},method`,
    /// preceded by `#` comment lines. Failed rows leave the energy cells empty.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("k_index,path_distance,kx,ky,kz");
        for b in 0..self.n_bands {
            let _ = write!(out, ",E_{b}");
        }
        out.push_str(",method\n");
        for row in &self.rows {
            let _ = write!(out, "{},{},{},{},{}", row.k_index, row.distance, row.k[0], row.k[1], row.k[2]);
            match &row.energies {
                Some(e) => e.iter().for_each(|b| {
                    let _ = write!(out, ",{}", b.value);
                }),
                None => (0..self.n_bands).for_each(|_| out.push(',')),
            }
            let _ = writeln!(out, ",{}", row.method());
        }
        out
    }

    /// Parses the output of [`BandTable::to_csv`]; statistics are not part of
    /// the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty band table".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 7 || cols[..5] != ["k_index", "path_distance", "kx", "ky", "kz"] || cols.last() != Some(&"method") {
            return Err(Error::Parse(format!("unexpected band table header '{header}'")));
        }
        let n_bands = cols.len() - 6;
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Parse(format!("line {}: expected {} fields", lineno + 1, cols.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{s}'", lineno + 1)))
            };
            let k_index = f[0]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: bad k_index", lineno + 1)))?;
            let method = *f.last().unwrap();
            let energies = if method == "failed" {
                None
            } else {
                let prov = match method {
                    "mixed" => Provenance::Optimized,
                    m => m.parse()?,
                };
                Some(
                    f[5..5 + n_bands]
                        .iter()
                        .map(|s| Ok(BandEnergy::plain(num(s)?, prov)))
                        .collect::<Result<Vec<_>>>()?,
                )
            };
            rows.push(BandRow {
                k_index,
                distance: num(f[1])?,
                k: [num(f[2])?, num(f[3])?, num(f[4])?],
                label: None,
                error: energies.is_none().then(|| "failed".to_string()),
                energies,
            });
        }
        Ok(Self { n_bands, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_sample() {
        let s = TrialStats::from_samples(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert!(TrialStats::from_samples(&[]).is_none());
    }

    #[test]
    fn csv_round_trip_keeps_values_and_gaps() {
        let p = KPoint { k: [0.1, 0.2, 0.3], distance: 0.5, label: None };
        let table = BandTable::new(
            2,
            vec![
                BandRow::new(0, &p, vec![BandEnergy::plain(-1.25, Provenance::Optimized), BandEnergy::plain(3.0, Provenance::Optimized)]),
                BandRow::failed(1, &p, "boom".into()),
            ],
        );
        let csv = table.to_csv(&["seed=1".to_string()]);
        assert!(csv.starts_with("# seed=1\nk_index,path_distance,kx,ky,kz,E_0,E_1,method\n"));
        let back = BandTable::from_csv(&csv).unwrap();
        assert_eq!(back.n_bands, 2);
        assert_eq!(back.rows[0].values().unwrap(), vec![-1.25, 3.0]);
        assert!(back.rows[1].energies.is_none());
    }
}
