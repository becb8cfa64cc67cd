//! Iterative phase estimation of `U = exp(i H tau)` with one ancilla.

use std::f64::consts::TAU;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::backend::{dense_unitary, Rng64, Simulator, StateVector, Tier};
use crate::circuit::{build_ansatz, controlled, trotter_evolution, AnsatzSpec, Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, HermitianMatrix, C64};
use crate::pauli::{single_excitation_index, PauliSum};

/// Fraction of the phase window kept free at each end.
pub const GUARD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpeConfig {
    /// Phase bits `t`.
    pub bits: usize,
    /// Trotter slices per application of `U(tau)`.
    pub slices: usize,
    pub shots_per_bit: u64,
    /// Evolution time in 1/eV; derived from the energy bounds when absent.
    pub tau: Option<f64>,
}

impl Default for QpeConfig {
    fn default() -> Self {
        Self {
            bits: 8,
            slices: 32,
            shots_per_bit: 1024,
            tau: None,
        }
    }
}

impl QpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 30 {
            return Err(Error::Config(format!("qpe bits must be in 1..=30, got {}", self.bits)));
        }
        if self.slices == 0 {
            return Err(Error::Config("qpe needs at least one Trotter slice".into()));
        }
        if self.shots_per_bit == 0 {
            return Err(Error::Config("qpe needs at least one shot per bit".into()));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tau must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// `tau` that maps `[lo, hi]` onto the guarded phase window at unit scale.
pub fn default_tau(lo: f64, hi: f64) -> f64 {
    TAU * (1.0 - 2.0 * GUARD) / (hi - lo)
}

/// `E' = scale * E + shift`, the map from physical to phase-window energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: f64,
    pub shift: f64,
    pub tau: f64,
}

impl AffineMap {
    pub fn encode(&self, e: f64) -> f64 {
        self.scale * e + self.shift
    }

    pub fn decode(&self, e_prime: f64) -> f64 {
        (e_prime - self.shift) / self.scale
    }

    /// Energy whose eigenphase of `exp(i H' tau)` is `phase` (in turns).
    pub fn decode_phase(&self, phase: f64) -> f64 {
        self.decode(TAU * phase / self.tau)
    }

    /// Physical energy step between adjacent `bits`-bit phases.
    pub fn grid_spacing(&self, bits: usize) -> f64 {
        TAU / self.tau / self.scale / (1u64 << bits) as f64
    }
}

/// Hamming-weight-one block of a number-conserving sum.
pub fn single_excitation_block(h: &PauliSum) -> Result<HermitianMatrix> {
    let n = h.n_qubits();
    let idx: Vec<usize> = (0..n).map(|q| single_excitation_index(n, q)).collect();
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for (c, w) in h.terms() {
        let act = w.action();
        for (col, &i) in idx.iter().enumerate() {
            if let Some(row) = idx.iter().position(|&j| j == i ^ act.flip) {
                data[row * n + col] += act.phase(i) * c;
            }
        }
    }
    HermitianMatrix::new(n, data)
}

/// Shifts and scales `h` so that `[lo, hi]` maps onto
/// `[GUARD, 1 - GUARD] * 2pi/tau`. The weight-one spectrum must stay inside
/// the full window `[0, 2pi/tau)` or the phases would wrap.
pub fn rescale(h: &PauliSum, lo: f64, hi: f64, tau: Option<f64>) -> Result<(PauliSum, AffineMap)> {
    if !(hi > lo) {
        return Err(Error::Config(format!("energy bounds need hi > lo, got [{lo}, {hi}]")));
    }
    let tau = tau.unwrap_or_else(|| default_tau(lo, hi));
    let window = TAU / tau;
    let scale = (1.0 - 2.0 * GUARD) * window / (hi - lo);
    let shift = GUARD * window - scale * lo;
    let map = AffineMap { scale, shift, tau };
    let spectrum = single_excitation_block(h)?.eigenvalues();
    let (s_lo, s_hi) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if map.encode(s_lo) < 0.0 || map.encode(s_hi) >= window {
        return Err(Error::BoundsDoNotBracket {
            lo,
            hi,
            spec_lo: s_lo,
            spec_hi: s_hi,
        });
    }
    Ok((h.affine(scale, shift), map))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    /// Phase in turns, an exact `t`-bit fraction.
    pub phase: f64,
    /// `phi_1 .. phi_t`, most significant first.
    pub bits: Vec<u8>,
    /// Majority fraction behind each bit, same order as `bits`.
    pub confidence: Vec<f64>,
}

impl PhaseEstimate {
    pub fn from_bits(bits: Vec<u8>, confidence: Vec<f64>) -> Self {
        let phase = bits
            .iter()
            .enumerate()
            .map(|(i, b)| *b as f64 / (1u64 << (i + 1)) as f64)
            .sum();
        Self {
            phase,
            bits,
            confidence,
        }
    }
}

/// Controlled powers `CU^(2^j)` for `j = 0..bits`, ancilla on qubit 0.
fn controlled_powers(h: &PauliSum, tau: f64, slices: usize, bits: usize) -> Result<Vec<DenseMatrix>> {
    let cu = dense_unitary(&controlled(&trotter_evolution(&h.grouped_by_support(), tau, slices)?))?;
    let mut powers = Vec::with_capacity(bits);
    powers.push(cu);
    for j in 1..bits {
        let p = powers[j - 1].matmul(&powers[j - 1]);
        powers.push(p);
    }
    Ok(powers)
}

/// Least-significant bit first; bit `k` uses `CU^(2^(k-1))` and the
/// feedback rotation `-2pi * sum_{j>k} phi_j / 2^(j-k+1)`. Each shot
/// re-prepares the register, so the ancilla statistics are binomial.
pub fn iterative_qpe(prep: &Circuit, h: &PauliSum, tau: f64, config: &QpeConfig, tier: Tier, rng: &mut Rng64) -> Result<PhaseEstimate> {
    config.validate()?;
    if tier.is_noisy() {
        return Err(Error::Config("phase estimation runs on the statevector or sampling tier only".into()));
    }
    if prep.n_qubits() != h.n_qubits() {
        return Err(Error::QubitMismatch {
            expected: h.n_qubits(),
            got: prep.n_qubits(),
        });
    }
    let n = prep.n_qubits();
    let psi = Simulator::default().run_statevector(prep)?;
    let powers = controlled_powers(h, tau, config.slices, config.bits)?;
    let t = config.bits;
    let mut bits = vec![0u8; t];
    let mut confidence = vec![0.0; t];
    for k in (1..=t).rev() {
        let omega = -TAU * ((k + 1)..=t).map(|j| bits[j - 1] as f64 / (1u64 << (j - k + 1)) as f64).sum::<f64>();
        let p1 = ancilla_one_probability(&psi, n, &powers[k - 1], omega);
        let (bit, conf) = if tier.is_exact() {
            let bit = (p1 > 0.5) as u8;
            (bit, p1.max(1.0 - p1))
        } else {
            let ones = Binomial::new(config.shots_per_bit, p1.clamp(0.0, 1.0))
                .expect("valid binomial")
                .sample(rng);
            let frac = ones as f64 / config.shots_per_bit as f64;
            ((2 * ones > config.shots_per_bit) as u8, frac.max(1.0 - frac))
        };
        bits[k - 1] = bit;
        confidence[k - 1] = conf;
    }
    Ok(PhaseEstimate::from_bits(bits, confidence))
}

fn ancilla_one_probability(psi: &StateVector, n: usize, cu: &DenseMatrix, omega: f64) -> f64 {
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (n + 1)];
    amps[..1 << n].copy_from_slice(psi.amplitudes());
    let mut s = StateVector::from_amplitudes(amps).expect("normalized input");
    s.apply_gate(&Gate::new(GateKind::H, vec![0]));
    let mut s = StateVector::from_amplitudes(cu.apply(s.amplitudes())).expect("unitary preserves norm");
    s.apply_gate(&Gate::new(GateKind::Phase(omega), vec![0]));
    s.apply_gate(&Gate::new(GateKind::H, vec![0]));
    s.probabilities()[1 << n..].iter().sum()
}

/// Weight-one Trotter error `||U_trot - exp(i H tau)||` divided by `tau`,
/// in the energy units of `h`.
pub fn trotter_bound(h: &PauliSum, tau: f64, slices: usize) -> Result<f64> {
    let n = h.n_qubits();
    let u = dense_unitary(&trotter_evolution(&h.grouped_by_support(), tau, slices)?)?;
    let exact = DenseMatrix::exp_i_hermitian(&single_excitation_block(h)?, tau);
    let idx: Vec<usize> = (0..n).map(|q| single_excitation_index(n, q)).collect();
    let mut block = DenseMatrix::identity(n);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            block.data[r * n + c] = u.get(i, j);
        }
    }
    Ok(block.sub(&exact).op_norm() / tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub energy: f64,
    pub estimate: PhaseEstimate,
    pub map: AffineMap,
    pub grid_spacing: f64,
    /// Trotter bound converted to physical energy units.
    pub trotter_bound: f64,
}

/// Runs phase estimation on the ansatz state `params` of `h` with energy
/// bounds `[lo, hi]` and decodes the dominant eigenvalue.
pub fn refine_level(
    params: &[f64],
    h: &PauliSum,
    bounds: (f64, f64),
    config: &QpeConfig,
    tier: Tier,
    rng: &mut Rng64,
) -> Result<Refinement> {
    let prep = build_ansatz(&AnsatzSpec::new(h.n_qubits(), params.to_vec())?);
    refine_state(&prep, h, bounds, config, tier, rng)
}

pub fn refine_state(
    prep: &Circuit,
    h: &PauliSum,
    bounds: (f64, f64),
    config: &QpeConfig,
    tier: Tier,
    rng: &mut Rng64,
) -> Result<Refinement> {
    config.validate()?;
    let (hp, map) = rescale(h, bounds.0, bounds.1, config.tau)?;
    let estimate = iterative_qpe(prep, &hp, map.tau, config, tier, rng)?;
    Ok(Refinement {
        energy: map.decode_phase(estimate.phase),
        grid_spacing: map.grid_spacing(config.bits),
        trotter_bound: trotter_bound(&hp, map.tau, config.slices)? / map.scale,
        estimate,
        map,
    })
}
