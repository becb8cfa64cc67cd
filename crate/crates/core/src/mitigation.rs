//! Readout calibration and zero-noise extrapolation.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backend::{Counts, NoiseDescriptor, Rng64, Simulator};
use crate::circuit::{adjoint, Circuit};
use crate::error::{Error, Result};

/// Above this condition number the calibration inverse is refused.
pub const MAX_CONDITION: f64 = 1e8;

/// Column-stochastic misread matrix, `entry(measured, prepared)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub n_qubits: usize,
    /// Shots per calibration circuit; 0 when built analytically.
    pub shots: u64,
    /// Row-major `2^n x 2^n` entries.
    pub data: Vec<f64>,
}

impl CalibrationMatrix {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entry(&self, measured: usize, prepared: usize) -> f64 {
        self.data[measured * self.dim() + prepared]
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self {
            n_qubits,
            shots: 0,
            data,
        }
    }

    /// Exact matrix of independent symmetric flips with probability `p`.
    pub fn symmetric_flip(n_qubits: usize, p: f64) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![0.0; dim * dim];
        for m in 0..dim {
            for j in 0..dim {
                let k = ((m ^ j) as u32).count_ones() as i32;
                data[m * dim + j] = p.powi(k) * (1.0 - p).powi(n_qubits as i32 - k);
            }
        }
        Self {
            n_qubits,
            shots: 0,
            data,
        }
    }

    /// Applies the channel to a distribution over prepared states.
    pub fn apply(&self, dist: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        (0..dim)
            .map(|m| (0..dim).map(|j| self.entry(m, j) * dist[j]).sum())
            .collect()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.data)
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.to_nalgebra().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Prepares every basis state with X gates and records its outcome frequencies.
pub fn measure_calibration(
    sim: &Simulator,
    noise: &NoiseDescriptor,
    n_qubits: usize,
    shots: u64,
    rng: &mut Rng64,
) -> Result<CalibrationMatrix> {
    let dim = 1usize << n_qubits;
    let mut data = vec![0.0; dim * dim];
    for prepared in 0..dim {
        let mut c = Circuit::new(n_qubits);
        for q in 0..n_qubits {
            if prepared >> (n_qubits - 1 - q) & 1 == 1 {
                c.x(q);
            }
        }
        let freqs = sim.sample_noisy_with(&c, shots, noise, rng)?.frequencies();
        for (measured, f) in freqs.into_iter().enumerate() {
            data[measured * dim + prepared] = f;
        }
    }
    Ok(CalibrationMatrix {
        n_qubits,
        shots,
        data,
    })
}

/// Least-squares inversion of the readout channel, clipped to a distribution.
pub fn mitigate_counts(counts: &Counts, cal: &CalibrationMatrix) -> Result<Vec<f64>> {
    mitigate_distribution(&counts.frequencies(), cal)
}

pub fn mitigate_distribution(observed: &[f64], cal: &CalibrationMatrix) -> Result<Vec<f64>> {
    if observed.len() != cal.dim() {
        return Err(Error::QubitMismatch {
            expected: cal.n_qubits,
            got: observed.len().trailing_zeros() as usize,
        });
    }
    let cond = cal.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularCalibration(cond));
    }
    let svd = cal.to_nalgebra().svd(true, true);
    let x = svd
        .solve(&DVector::from_column_slice(observed), 0.0)
        .map_err(|e| Error::InvalidCircuit(e.to_string()))?;
    Ok(clip_and_normalize(x.as_slice()))
}

/// Sets negative entries to zero and rescales to unit sum.
pub fn clip_and_normalize(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.into_iter().map(|v| v / total).collect()
    } else {
        clipped
    }
}

/// Global folding `c (c^dagger c)^k` with `scale = 2k + 1`.
pub fn fold_circuit(c: &Circuit, scale: usize) -> Result<Circuit> {
    if scale == 0 || scale % 2 == 0 {
        return Err(Error::Config(format!("fold scale must be odd and positive, got {scale}")));
    }
    let inv = adjoint(c);
    let mut out = c.clone();
    for _ in 0..(scale - 1) / 2 {
        out.append(&inv)?;
        out.append(c)?;
    }
    Ok(out)
}

/// Noise scale factors for extrapolation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZneSchedule {
    pub scales: Vec<usize>,
}

impl Default for ZneSchedule {
    fn default() -> Self {
        Self { scales: vec![1, 3, 5] }
    }
}

impl ZneSchedule {
    pub fn new(scales: Vec<usize>) -> Result<Self> {
        let s = Self { scales };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.scales.len() >= 2
            && self.scales[0] == 1
            && self.scales.iter().all(|s| s % 2 == 1)
            && self.scales.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "zne scales must be odd, strictly increasing, start at 1 and have at least two entries: {:?}",
                self.scales
            )))
        }
    }
}

/// Value at zero of the polynomial through every `(scale, value)` point.
pub fn zne_expectation(values: &BTreeMap<usize, f64>, schedule: &ZneSchedule) -> Result<f64> {
    schedule.validate()?;
    let pts: Vec<(f64, f64)> = schedule
        .scales
        .iter()
        .map(|s| {
            values
                .get(s)
                .map(|v| (*s as f64, *v))
                .ok_or_else(|| Error::Config(format!("no value at scale {s}")))
        })
        .collect::<Result<_>>()?;
    Ok(richardson_at_zero(&pts))
}

/// Lagrange interpolation evaluated at zero.
pub fn richardson_at_zero(points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, (xi, yi))| {
            let w: f64 = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (xj, _))| xj / (xj - xi))
                .product();
            yi * w
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_extrapolation() {
        assert!((richardson_at_zero(&[(1.0, 2.0), (3.0, 4.0)]) - 1.0).abs() < 1e-15);
        assert!((richardson_at_zero(&[(1.0, 5.0), (3.0, 5.0)]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(ZneSchedule::new(vec![1, 3, 5]).is_ok());
        for bad in [vec![1], vec![3, 5], vec![1, 2], vec![1, 5, 3]] {
            assert!(ZneSchedule::new(bad).is_err());
        }
    }

    #[test]
    fn even_fold_rejected() {
        assert!(fold_circuit(&Circuit::new(1), 2).is_err());
        assert!(fold_circuit(&Circuit::new(1), 0).is_err());
    }

    #[test]
    fn identity_calibration_is_noop() {
        let f = vec![0.1, 0.2, 0.3, 0.4];
        let out = mitigate_distribution(&f, &CalibrationMatrix::identity(2)).unwrap();
        for (a, b) in f.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_rejected() {
        let cal = CalibrationMatrix::symmetric_flip(1, 0.5);
        assert!(matches!(
            mitigate_distribution(&[0.5, 0.5], &cal),
            Err(Error::SingularCalibration(_))
        ));
    }

    #[test]
    fn clipping() {
        let out = clip_and_normalize(&[0.6, -0.1, 0.5]);
        assert_eq!(out[1], 0.0);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
