//! Circuit execution: exact statevectors, finite-shot sampling and
//! stochastic bit-flip trajectories.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::circuit::{basis_rotation, Action, Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, C64};
use crate::mitigation::CalibrationMatrix;
use crate::pauli::{Pauli, PauliSum, PauliWord};

/// Default qubit cap of the statevector simulator.
pub const DEFAULT_STATE_CAP: usize = 20;
/// Largest register for which dense unitaries are built.
pub const DENSE_UNITARY_CAP: usize = 10;
/// Default ensemble size per commuting group.
pub const DEFAULT_SHOTS: u64 = 8096;

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Amplitudes of an `n`-qubit register; qubit 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(Error::InvalidCircuit(format!("{dim} amplitudes is not a power of two")));
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidCircuit("state has zero norm".into()));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amps: amps.into_iter().map(|z| z / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        let cmask = gate.action_controls().iter().fold(0, |m, &q| m | self.bit(q));
        match gate.action() {
            Action::One { target, matrix } => {
                let tb = self.bit(target);
                for i in 0..self.amps.len() {
                    if i & tb != 0 || i & cmask != cmask {
                        continue;
                    }
                    let (a0, a1) = (self.amps[i], self.amps[i | tb]);
                    self.amps[i] = matrix[0][0] * a0 + matrix[0][1] * a1;
                    self.amps[i | tb] = matrix[1][0] * a0 + matrix[1][1] * a1;
                }
            }
            Action::Two { a, b, matrix } => {
                let (ba, bb) = (self.bit(a), self.bit(b));
                for i in 0..self.amps.len() {
                    if i & (ba | bb) != 0 || i & cmask != cmask {
                        continue;
                    }
                    let idx = [i, i | bb, i | ba, i | ba | bb];
                    let v = idx.map(|j| self.amps[j]);
                    for (r, &j) in idx.iter().enumerate() {
                        self.amps[j] = (0..4).map(|k| matrix[r][k] * v[k]).sum();
                    }
                }
            }
        }
    }

    /// Pauli X on `q`.
    pub fn flip(&mut self, q: usize) {
        let tb = self.bit(q);
        for i in 0..self.amps.len() {
            if i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    pub fn apply_circuit(&mut self, c: &Circuit) {
        for g in c.gates() {
            self.apply_gate(g);
        }
    }

    /// `<psi|P|psi>`.
    pub fn word_expectation(&self, word: &PauliWord) -> f64 {
        let act = word.action();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| (self.amps[i ^ act.flip].conj() * act.phase(i) * a).re)
            .sum()
    }
}

/// `sum_i a_i <psi|P_i|psi>` without sampling.
pub fn expval_exact(state: &StateVector, sum: &PauliSum) -> f64 {
    sum.terms().iter().map(|(c, w)| c * state.word_expectation(w)).sum()
}

/// Exact simulator with a qubit cap.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    pub state_cap: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl Simulator {
    fn check(&self, n: usize) -> Result<()> {
        if n > self.state_cap {
            Err(Error::TooManyQubits(n, self.state_cap))
        } else {
            Ok(())
        }
    }

    pub fn run_statevector(&self, c: &Circuit) -> Result<StateVector> {
        self.check(c.n_qubits())?;
        let mut s = StateVector::zero(c.n_qubits());
        s.apply_circuit(c);
        Ok(s)
    }

    pub fn run_from(&self, c: &Circuit, initial: &StateVector) -> Result<StateVector> {
        if initial.n_qubits() != c.n_qubits() {
            return Err(Error::QubitMismatch {
                expected: c.n_qubits(),
                got: initial.n_qubits(),
            });
        }
        self.check(c.n_qubits())?;
        let mut s = initial.clone();
        s.apply_circuit(c);
        Ok(s)
    }
}

/// Composed unitary of a circuit on at most [`DENSE_UNITARY_CAP`] qubits.
pub fn dense_unitary(c: &Circuit) -> Result<DenseMatrix> {
    let n = c.n_qubits();
    if n > DENSE_UNITARY_CAP {
        return Err(Error::TooManyQubits(n, DENSE_UNITARY_CAP));
    }
    let dim = 1 << n;
    let mut m = DenseMatrix::identity(dim);
    for col in 0..dim {
        let mut s = StateVector::basis(n, col);
        s.apply_circuit(c);
        for (row, a) in s.amplitudes().iter().enumerate() {
            m.data[row * dim + col] = *a;
        }
    }
    Ok(m)
}

/// Measurement outcomes keyed by basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

/// JSON form of [`Counts`] with bitstring keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub n_qubits: usize,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl Counts {
    pub fn from_histogram(n_qubits: usize, histogram: &[u64]) -> Self {
        let counts: BTreeMap<usize, u64> = histogram
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (i, *c))
            .collect();
        Self {
            n_qubits,
            shots: histogram.iter().sum(),
            counts,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn get_bits(&self, bits: &str) -> u64 {
        usize::from_str_radix(bits, 2).map(|i| self.get(i)).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(k, v)| (*k, *v))
    }

    /// Relative frequency of every basis index.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; 1 << self.n_qubits];
        for (i, c) in &self.counts {
            f[*i] = *c as f64 / self.shots as f64;
        }
        f
    }

    pub fn bitstring(&self, index: usize) -> String {
        format!("{index:0width$b}", width = self.n_qubits)
    }

    pub fn to_record(&self) -> CountsRecord {
        CountsRecord {
            n_qubits: self.n_qubits,
            shots: self.shots,
            counts: self.counts.iter().map(|(i, c)| (self.bitstring(*i), *c)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("counts serialize")
    }
}

/// Multinomial draw of `shots` outcomes through sequential binomials.
pub fn sample_multinomial(probs: &[f64], shots: u64, rng: &mut Rng64) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    for (i, p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q == 0.0 {
            0
        } else if q == 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}

/// Bit-flip error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDescriptor {
    /// X-flip probability per touched qubit after every gate.
    pub gate_flip_prob: f64,
    /// Flip probability of each classical bit at measurement.
    pub readout_flip_prob: f64,
}

impl NoiseDescriptor {
    pub const NOISELESS: Self = Self {
        gate_flip_prob: 0.0,
        readout_flip_prob: 0.0,
    };

    /// Stand-in for a contemporary superconducting device.
    pub const DEVICE_LIKE: Self = Self {
        gate_flip_prob: 0.001,
        readout_flip_prob: 0.02,
    };

    pub fn new(gate_flip_prob: f64, readout_flip_prob: f64) -> Result<Self> {
        let n = Self {
            gate_flip_prob,
            readout_flip_prob,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("gate_flip_prob", self.gate_flip_prob), ("readout_flip_prob", self.readout_flip_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

impl Simulator {
    /// i.i.d. draws from the output distribution of `c`.
    pub fn sample(&self, c: &Circuit, shots: u64, seed: u64) -> Result<Counts> {
        self.sample_with(c, shots, &mut rng_from_seed(seed))
    }

    pub fn sample_with(&self, c: &Circuit, shots: u64, rng: &mut Rng64) -> Result<Counts> {
        check_shots(shots)?;
        let probs = self.run_statevector(c)?.probabilities();
        Ok(Counts::from_histogram(c.n_qubits(), &sample_multinomial(&probs, shots, rng)))
    }

    /// Sampling with stochastic X-flip trajectories and readout flips.
    pub fn sample_noisy(&self, c: &Circuit, shots: u64, noise: &NoiseDescriptor, seed: u64) -> Result<Counts> {
        self.sample_noisy_with(c, shots, noise, &mut rng_from_seed(seed))
    }

    pub fn sample_noisy_with(&self, c: &Circuit, shots: u64, noise: &NoiseDescriptor, rng: &mut Rng64) -> Result<Counts> {
        check_shots(shots)?;
        noise.validate()?;
        self.check(c.n_qubits())?;
        let n = c.n_qubits();
        let dim = 1usize << n;

        // (gate index, qubit) for every touched qubit, in circuit order
        let touches: Vec<(usize, usize)> = c
            .gates()
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| g.qubits().map(move |q| (gi, q)))
            .collect();

        let mut patterns: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        let mut noisy_shots = 0u64;
        if noise.gate_flip_prob > 0.0 && !touches.is_empty() {
            let t = touches.len() as u64;
            let total = shots * t;
            let geo = Geometric::new(noise.gate_flip_prob).expect("valid probability");
            let mut pos = geo.sample(rng);
            let mut current: Option<(u64, Vec<u32>)> = None;
            while pos < total {
                let (shot, touch) = (pos / t, (pos % t) as u32);
                match &mut current {
                    Some((s, events)) if *s == shot => events.push(touch),
                    _ => {
                        if let Some((_, events)) = current.take() {
                            *patterns.entry(events).or_insert(0) += 1;
                            noisy_shots += 1;
                        }
                        current = Some((shot, vec![touch]));
                    }
                }
                pos = pos.saturating_add(1).saturating_add(geo.sample(rng));
            }
            if let Some((_, events)) = current {
                *patterns.entry(events).or_insert(0) += 1;
                noisy_shots += 1;
            }
        }

        // ideal run, keeping intermediate states for trajectories to resume from
        let keep_prefix = !patterns.is_empty() && c.len().saturating_mul(dim) <= 1 << 22;
        let mut prefix: Vec<StateVector> = Vec::new();
        let mut ideal = StateVector::zero(n);
        for g in c.gates() {
            ideal.apply_gate(g);
            if keep_prefix {
                prefix.push(ideal.clone());
            }
        }

        let mut histogram = vec![0u64; dim];
        let clean = shots - noisy_shots;
        if clean > 0 {
            let draws = sample_multinomial(&ideal.probabilities(), clean, rng);
            histogram.iter_mut().zip(draws).for_each(|(h, d)| *h += d);
        }
        for (events, count) in &patterns {
            let first_gate = touches[events[0] as usize].0;
            let (mut state, start) = if keep_prefix {
                (prefix[first_gate].clone(), first_gate + 1)
            } else {
                let mut s = StateVector::zero(n);
                for g in &c.gates()[..=first_gate] {
                    s.apply_gate(g);
                }
                (s, first_gate + 1)
            };
            let mut ev = events.iter().map(|&e| touches[e as usize]).peekable();
            while let Some(&(gi, q)) = ev.peek() {
                if gi != first_gate {
                    break;
                }
                state.flip(q);
                ev.next();
            }
            for (gi, g) in c.gates().iter().enumerate().skip(start) {
                state.apply_gate(g);
                while let Some(&(egi, q)) = ev.peek() {
                    if egi != gi {
                        break;
                    }
                    state.flip(q);
                    ev.next();
                }
            }
            let draws = sample_multinomial(&state.probabilities(), *count, rng);
            histogram.iter_mut().zip(draws).for_each(|(h, d)| *h += d);
        }

        if noise.readout_flip_prob > 0.0 {
            histogram = readout_flips(&histogram, n, noise.readout_flip_prob, rng);
        }
        Ok(Counts::from_histogram(n, &histogram))
    }
}

fn check_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        Err(Error::Config("at least one shot is required".into()))
    } else {
        Ok(())
    }
}

/// Applies independent per-bit readout flips to a histogram.
fn readout_flips(histogram: &[u64], n: usize, p: f64, rng: &mut Rng64) -> Vec<u64> {
    let dim = histogram.len();
    let mut out = vec![0u64; dim];
    if n <= 10 {
        let mask_probs: Vec<f64> = (0..dim)
            .map(|m| {
                let k = (m as u32).count_ones() as i32;
                p.powi(k) * (1.0 - p).powi(n as i32 - k)
            })
            .collect();
        for (x, &count) in histogram.iter().enumerate() {
            if count == 0 {
                continue;
            }
            for (mask, c) in sample_multinomial(&mask_probs, count, rng).into_iter().enumerate() {
                out[x ^ mask] += c;
            }
        }
    } else {
        for (x, &count) in histogram.iter().enumerate() {
            for _ in 0..count {
                let mut y = x;
                for q in 0..n {
                    if rng.gen::<f64>() < p {
                        y ^= 1 << q;
                    }
                }
                out[y] += 1;
            }
        }
    }
    out
}

/// Evaluation tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Exact amplitudes, exact expectation values.
    Statevector,
    /// Ideal gates, finite-shot estimates.
    Sampling,
    /// Bit-flip gate and readout noise.
    Noisy,
    /// Noisy, with readout calibration and zero-noise extrapolation.
    Calibrated,
}

impl Tier {
    pub fn is_noisy(&self) -> bool {
        matches!(self, Tier::Noisy | Tier::Calibrated)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Tier::Statevector)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Statevector => "statevector",
            Tier::Sampling => "sampling",
            Tier::Noisy => "noisy",
            Tier::Calibrated => "calibrated",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(Tier::Statevector),
            "sampling" => Ok(Tier::Sampling),
            "noisy" => Ok(Tier::Noisy),
            "calibrated" => Ok(Tier::Calibrated),
            other => Err(Error::Config(format!("unknown tier '{other}'"))),
        }
    }
}

/// Stateless evaluator for one tier; randomness comes from the caller's stream.
#[derive(Debug, Clone, Copy)]
pub struct Backend {
    pub tier: Tier,
    pub noise: NoiseDescriptor,
    pub simulator: Simulator,
}

impl Backend {
    pub fn new(tier: Tier, noise: NoiseDescriptor) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            tier,
            noise,
            simulator: Simulator::default(),
        })
    }

    pub fn statevector() -> Self {
        Self::new(Tier::Statevector, NoiseDescriptor::NOISELESS).unwrap()
    }

    pub fn sampling() -> Self {
        Self::new(Tier::Sampling, NoiseDescriptor::NOISELESS).unwrap()
    }

    /// Measures `c` in the computational basis.
    pub fn measure(&self, c: &Circuit, shots: u64, rng: &mut Rng64) -> Result<Counts> {
        if self.tier.is_noisy() {
            self.simulator.sample_noisy_with(c, shots, &self.noise, rng)
        } else {
            self.simulator.sample_with(c, shots, rng)
        }
    }

    /// Estimates every word of a qubit-wise commuting group from a single
    /// basis-rotated ensemble. On the statevector tier the values are exact.
    pub fn estimate_group(
        &self,
        prep: &Circuit,
        words: &[&PauliWord],
        shots: u64,
        rng: &mut Rng64,
        calibration: Option<&CalibrationMatrix>,
    ) -> Result<GroupEstimate> {
        let n = prep.n_qubits();
        for (i, w) in words.iter().enumerate() {
            if w.n_qubits() != n {
                return Err(Error::QubitMismatch {
                    expected: n,
                    got: w.n_qubits(),
                });
            }
            for v in &words[..i] {
                if !v.qubitwise_commutes(w) {
                    return Err(Error::NotQubitwiseCommuting(v.to_string(), w.to_string()));
                }
            }
        }
        if self.tier.is_exact() {
            let state = self.simulator.run_statevector(prep)?;
            return Ok(GroupEstimate {
                expectations: words.iter().map(|w| state.word_expectation(w)).collect(),
                distribution: None,
            });
        }
        let mut basis = vec![Pauli::I; n];
        for w in words {
            for (q, p) in w.letters().iter().enumerate() {
                if *p != Pauli::I {
                    basis[q] = *p;
                }
            }
        }
        let circuit = prep.then(&basis_rotation(&PauliWord::new(basis)))?;
        let counts = self.measure(&circuit, shots, rng)?;
        let distribution = match calibration {
            Some(cal) => crate::mitigation::mitigate_counts(&counts, cal)?,
            None => counts.frequencies(),
        };
        let expectations = words
            .iter()
            .map(|w| {
                let act = w.action();
                distribution
                    .iter()
                    .enumerate()
                    .map(|(b, f)| f * act.rotated_eigenvalue(b))
                    .sum()
            })
            .collect();
        Ok(GroupEstimate {
            expectations,
            distribution: Some(distribution),
        })
    }
}

/// Per-word expectations of one commuting group.
#[derive(Debug, Clone)]
pub struct GroupEstimate {
    pub expectations: Vec<f64>,
    /// Outcome (quasi-)distribution over rotated bitstrings; `None` when exact.
    pub distribution: Option<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> Circuit {
        let mut c = Circuit::new(2);
        c.h(0).cnot(0, 1);
        c
    }

    #[test]
    fn x_flips_zero() {
        let mut c = Circuit::new(1);
        c.x(0);
        let s = Simulator::default().run_statevector(&c).unwrap();
        assert_eq!(s.amplitudes()[1], C64::new(1.0, 0.0));
    }

    #[test]
    fn bell_state() {
        let s = Simulator::default().run_statevector(&bell()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = s.amplitudes();
        assert!((a[0].re - r).abs() < 1e-15 && (a[3].re - r).abs() < 1e-15);
        assert!(a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
    }

    #[test]
    fn state_cap_enforced() {
        let sim = Simulator { state_cap: 3 };
        assert!(matches!(sim.run_statevector(&Circuit::new(4)), Err(Error::TooManyQubits(4, 3))));
    }

    #[test]
    fn simple_expectations() {
        let z = PauliSum::from_terms(1, [(1.0, "Z".parse().unwrap())]).unwrap();
        assert_eq!(expval_exact(&StateVector::zero(1), &z), 1.0);
        let mut c = Circuit::new(1);
        c.h(0);
        let plus = Simulator::default().run_statevector(&c).unwrap();
        assert!(expval_exact(&plus, &z).abs() < 1e-15);
    }

    #[test]
    fn deterministic_sampling() {
        let mut c = Circuit::new(1);
        c.x(0);
        let counts = Simulator::default().sample(&c, 100, 3).unwrap();
        assert_eq!(counts.get_bits("1"), 100);
        assert_eq!(counts.shots(), 100);
        let a = Simulator::default().sample(&bell(), 500, 11).unwrap();
        let b = Simulator::default().sample(&bell(), 500, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get_bits("01") + a.get_bits("10"), 0);
    }

    #[test]
    fn bell_frequencies_concentrate() {
        let s = 8096u64;
        let counts = Simulator::default().sample(&bell(), s, 5).unwrap();
        let f = counts.get_bits("00") as f64 / s as f64;
        let sigma = (0.25f64 / s as f64).sqrt();
        assert!((f - 0.5).abs() <= 5.0 * sigma);
    }

    #[test]
    fn noiseless_noisy_matches_sampling_bitwise() {
        let sim = Simulator::default();
        let mut c = bell();
        c.ry(1, 0.4);
        for seed in 0..5 {
            let a = sim.sample(&c, 1000, seed).unwrap();
            let b = sim.sample_noisy(&c, 1000, &NoiseDescriptor::NOISELESS, seed).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pure_readout_error() {
        let s = 200_000u64;
        let counts = Simulator::default()
            .sample_noisy(&Circuit::new(1), s, &NoiseDescriptor::new(0.0, 0.1).unwrap(), 9)
            .unwrap();
        let f = counts.get_bits("1") as f64 / s as f64;
        assert!((f - 0.1).abs() < 5.0 * (0.09 / s as f64).sqrt());
    }

    #[test]
    fn single_gate_flip_probability() {
        // one X gate, one touch: the outcome is 0 exactly when the flip fires
        let s = 200_000u64;
        let mut c = Circuit::new(1);
        c.x(0);
        let counts = Simulator::default()
            .sample_noisy(&c, s, &NoiseDescriptor::new(0.2, 0.0).unwrap(), 4)
            .unwrap();
        let f = counts.get_bits("0") as f64 / s as f64;
        assert!((f - 0.2).abs() < 5.0 * (0.16 / s as f64).sqrt());
    }

    #[test]
    fn group_on_basis_state() {
        let mut c = Circuit::new(2);
        c.x(1);
        let words: Vec<PauliWord> = ["ZI", "IZ", "ZZ"].iter().map(|s| s.parse().unwrap()).collect();
        let refs: Vec<&PauliWord> = words.iter().collect();
        let mut rng = rng_from_seed(1);
        for backend in [Backend::statevector(), Backend::sampling()] {
            for shots in [1, 17] {
                let est = backend.estimate_group(&c, &refs, shots, &mut rng, None).unwrap();
                assert_eq!(est.expectations, vec![1.0, -1.0, -1.0]);
            }
        }
    }

    #[test]
    fn non_commuting_group_rejected() {
        let words: Vec<PauliWord> = ["XX", "YY"].iter().map(|s| s.parse().unwrap()).collect();
        let refs: Vec<&PauliWord> = words.iter().collect();
        let err = Backend::sampling()
            .estimate_group(&bell(), &refs, 10, &mut rng_from_seed(0), None)
            .unwrap_err();
        assert!(matches!(err, Error::NotQubitwiseCommuting(_, _)));
    }

    #[test]
    fn counts_json() {
        let c = Counts::from_histogram(2, &[3, 0, 1, 0]);
        assert_eq!(c.to_json(), r#"{"n_qubits":2,"shots":4,"counts":{"00":3,"10":1}}"#);
    }

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = rng_from_seed(2);
        let d = sample_multinomial(&[0.2, 0.0, 0.5, 0.3], 1234, &mut rng);
        assert_eq!(d.iter().sum::<u64>(), 1234);
        assert_eq!(d[1], 0);
    }
}
