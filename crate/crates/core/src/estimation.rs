//! Energy estimation from commuting-group measurements, with optional
//! readout calibration and zero-noise extrapolation.

use std::collections::BTreeMap;

use crate::backend::{expval_exact, Backend, Rng64, Tier};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::mitigation::{fold_circuit, measure_calibration, zne_expectation, CalibrationMatrix, ZneSchedule};
use crate::pauli::{partition, CommutingPartition, PauliSum, PauliWord};

/// A Pauli sum together with its measurement partition.
#[derive(Debug, Clone)]
pub struct MeasuredOperator {
    sum: PauliSum,
    partition: CommutingPartition,
}

impl MeasuredOperator {
    pub fn new(sum: PauliSum) -> Self {
        let partition = partition(&sum);
        Self { sum, partition }
    }

    pub fn sum(&self) -> &PauliSum {
        &self.sum
    }

    pub fn partition(&self) -> &CommutingPartition {
        &self.partition
    }

    /// Groups needing their own measurement ensemble.
    pub fn measured_groups(&self) -> usize {
        self.partition.measured_groups(&self.sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub value: f64,
    /// Variance of the estimator from shot noise; zero on the exact tier.
    pub variance: f64,
    /// Measurement ensembles that were needed, counted once per group.
    pub groups: usize,
}

/// Evaluates operators on one backend tier.
#[derive(Debug, Clone)]
pub struct Estimator {
    backend: Backend,
    shots: u64,
    zne: ZneSchedule,
    calibration: Option<CalibrationMatrix>,
}

impl Estimator {
    /// For every tier except `Calibrated`, which needs [`Estimator::calibrated`].
    pub fn new(backend: Backend, shots: u64) -> Result<Self> {
        if backend.tier == Tier::Calibrated {
            return Err(Error::Config("the calibrated tier needs a calibration run".into()));
        }
        if shots == 0 {
            return Err(Error::Config("at least one shot is required".into()));
        }
        Ok(Self {
            backend,
            shots,
            zne: ZneSchedule::default(),
            calibration: None,
        })
    }

    /// Measures a readout calibration for `n_qubits` and enables ZNE.
    pub fn calibrated(backend: Backend, shots: u64, zne: ZneSchedule, n_qubits: usize, rng: &mut Rng64) -> Result<Self> {
        zne.validate()?;
        if shots == 0 {
            return Err(Error::Config("at least one shot is required".into()));
        }
        let cal = measure_calibration(&backend.simulator, &backend.noise, n_qubits, shots, rng)?;
        Ok(Self {
            backend,
            shots,
            zne,
            calibration: Some(cal),
        })
    }

    /// Builds the estimator appropriate to the backend's tier.
    pub fn for_tier(backend: Backend, shots: u64, zne: ZneSchedule, n_qubits: usize, rng: &mut Rng64) -> Result<Self> {
        if backend.tier == Tier::Calibrated {
            Self::calibrated(backend, shots, zne, n_qubits, rng)
        } else {
            Self::new(backend, shots)
        }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn calibration(&self) -> Option<&CalibrationMatrix> {
        self.calibration.as_ref()
    }

    /// `<prep| op |prep>` estimated on the configured tier.
    pub fn estimate(&self, prep: &Circuit, op: &MeasuredOperator, rng: &mut Rng64) -> Result<EnergyEstimate> {
        if op.sum.n_qubits() != prep.n_qubits() {
            return Err(Error::QubitMismatch {
                expected: prep.n_qubits(),
                got: op.sum.n_qubits(),
            });
        }
        let groups = op.measured_groups();
        match self.backend.tier {
            Tier::Statevector => {
                let state = self.backend.simulator.run_statevector(prep)?;
                Ok(EnergyEstimate {
                    value: expval_exact(&state, &op.sum),
                    variance: 0.0,
                    groups,
                })
            }
            Tier::Sampling | Tier::Noisy => self.sampled(prep, op, rng),
            Tier::Calibrated => {
                let mut values = BTreeMap::new();
                let mut variances = Vec::with_capacity(self.zne.scales.len());
                for &scale in &self.zne.scales {
                    let folded = fold_circuit(prep, scale)?;
                    let e = self.sampled(&folded, op, rng)?;
                    values.insert(scale, e.value);
                    variances.push(e.variance);
                }
                let value = zne_expectation(&values, &self.zne)?;
                let weights = richardson_weights(&self.zne.scales);
                let variance = weights.iter().zip(&variances).map(|(w, v)| w * w * v).sum();
                Ok(EnergyEstimate { value, variance, groups })
            }
        }
    }

    fn sampled(&self, prep: &Circuit, op: &MeasuredOperator, rng: &mut Rng64) -> Result<EnergyEstimate> {
        let terms = op.sum.terms();
        let mut value = 0.0;
        let mut variance = 0.0;
        for group in &op.partition.groups {
            let (ids, measured): (Vec<usize>, Vec<usize>) = group.iter().partition(|&&i| terms[i].1.is_identity());
            value += ids.iter().map(|&i| terms[i].0).sum::<f64>();
            if measured.is_empty() {
                continue;
            }
            let words: Vec<&PauliWord> = measured.iter().map(|&i| &terms[i].1).collect();
            let est = self
                .backend
                .estimate_group(prep, &words, self.shots, rng, self.calibration.as_ref())?;
            let coefs: Vec<f64> = measured.iter().map(|&i| terms[i].0).collect();
            value += coefs.iter().zip(&est.expectations).map(|(a, e)| a * e).sum::<f64>();
            if let Some(dist) = &est.distribution {
                let actions: Vec<_> = words.iter().map(|w| w.action()).collect();
                let (mut m1, mut m2) = (0.0, 0.0);
                for (b, f) in dist.iter().enumerate() {
                    if *f == 0.0 {
                        continue;
                    }
                    let v: f64 = coefs
                        .iter()
                        .zip(&actions)
                        .map(|(a, act)| a * act.rotated_eigenvalue(b))
                        .sum();
                    m1 += f * v;
                    m2 += f * v * v;
                }
                variance += (m2 - m1 * m1).max(0.0) / self.shots as f64;
            }
        }
        Ok(EnergyEstimate {
            value,
            variance,
            groups: op.measured_groups(),
        })
    }
}

/// Lagrange weights that evaluate the interpolating polynomial at zero.
pub fn richardson_weights(scales: &[usize]) -> Vec<f64> {
    scales
        .iter()
        .enumerate()
        .map(|(i, &si)| {
            scales
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &sj)| sj as f64 / (sj as f64 - si as f64))
                .product()
        })
        .collect()
}
