//! Gate-level circuits: the particle-number conserving ansatz, adjoints,
//! controlled circuits, measurement basis rotations and first-order
//! product-formula time evolution.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::pauli::{Pauli, PauliSum, PauliWord};

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    X,
    H,
    S,
    Sdg,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Phase(f64),
    /// Targets are `[control, target]`.
    Cnot,
    Unitary1(Mat2),
    /// Targets `[a, b]`; `a` is the more significant index of the matrix.
    Unitary2(Box<Mat4>),
}

/// A gate applied to `targets`, conditioned on every qubit in `controls`
/// being |1>.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
}

/// How the simulator applies a gate.
pub enum Action {
    One { target: usize, matrix: Mat2 },
    Two { a: usize, b: usize, matrix: Mat4 },
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Self {
            kind,
            targets,
            controls: Vec::new(),
        }
    }

    /// Every qubit the gate touches, targets first.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().chain(&self.controls).copied()
    }

    pub fn arity(&self) -> usize {
        self.targets.len() + self.controls.len()
    }

    /// Single-qubit matrix of one-target kinds.
    pub fn matrix1(kind: &GateKind) -> Option<Mat2> {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Some(match kind {
            GateKind::X => [[z, one], [one, z]],
            GateKind::H => [[c(r, 0.0), c(r, 0.0)], [c(r, 0.0), c(-r, 0.0)]],
            GateKind::S => [[one, z], [z, c(0.0, 1.0)]],
            GateKind::Sdg => [[one, z], [z, c(0.0, -1.0)]],
            GateKind::Rx(a) => {
                let (s, co) = (a / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            GateKind::Ry(a) => {
                let (s, co) = (a / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateKind::Rz(a) => [[C64::from_polar(1.0, -a / 2.0), z], [z, C64::from_polar(1.0, a / 2.0)]],
            GateKind::Phase(a) => [[one, z], [z, C64::from_polar(1.0, *a)]],
            GateKind::Unitary1(m) => *m,
            GateKind::Cnot | GateKind::Unitary2(_) => return None,
        })
    }

    pub fn action(&self) -> Action {
        match &self.kind {
            GateKind::Cnot => Action::One {
                target: self.targets[1],
                matrix: Self::matrix1(&GateKind::X).unwrap(),
            },
            GateKind::Unitary2(m) => Action::Two {
                a: self.targets[0],
                b: self.targets[1],
                matrix: **m,
            },
            k => Action::One {
                target: self.targets[0],
                matrix: Self::matrix1(k).unwrap(),
            },
        }
    }

    /// Control qubits of the action, including the CNOT control.
    pub fn action_controls(&self) -> Vec<usize> {
        let mut ctl = self.controls.clone();
        if self.kind == GateKind::Cnot {
            ctl.push(self.targets[0]);
        }
        ctl
    }

    pub fn adjoint(&self) -> Self {
        let kind = match &self.kind {
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            GateKind::Rx(a) => GateKind::Rx(-a),
            GateKind::Ry(a) => GateKind::Ry(-a),
            GateKind::Rz(a) => GateKind::Rz(-a),
            GateKind::Phase(a) => GateKind::Phase(-a),
            GateKind::Unitary1(m) => GateKind::Unitary1([
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ]),
            GateKind::Unitary2(m) => {
                let mut t = [[c(0.0, 0.0); 4]; 4];
                for (r, row) in t.iter_mut().enumerate() {
                    for (col, v) in row.iter_mut().enumerate() {
                        *v = m[col][r].conj();
                    }
                }
                GateKind::Unitary2(Box::new(t))
            }
            k => k.clone(),
        };
        Self {
            kind,
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let expected_targets = match self.kind {
            GateKind::Cnot | GateKind::Unitary2(_) => 2,
            _ => 1,
        };
        if self.targets.len() != expected_targets {
            return Err(Error::InvalidCircuit(format!(
                "{:?} expects {expected_targets} target(s), got {}",
                self.kind,
                self.targets.len()
            )));
        }
        let qs: Vec<usize> = self.qubits().collect();
        for (i, q) in qs.iter().enumerate() {
            if *q >= n {
                return Err(Error::InvalidCircuit(format!("qubit {q} out of range for {n} qubits")));
            }
            if qs[..i].contains(q) {
                return Err(Error::InvalidCircuit(format!("gate uses qubit {q} twice")));
            }
        }
        match &self.kind {
            GateKind::Rx(a) | GateKind::Ry(a) | GateKind::Rz(a) | GateKind::Phase(a) if !a.is_finite() => {
                Err(Error::InvalidCircuit("non-finite rotation angle".into()))
            }
            GateKind::Unitary1(m) => check_unitary(&m.iter().flatten().copied().collect::<Vec<_>>(), 2),
            GateKind::Unitary2(m) => check_unitary(&m.iter().flatten().copied().collect::<Vec<_>>(), 4),
            _ => Ok(()),
        }
    }
}

fn check_unitary(m: &[C64], n: usize) -> Result<()> {
    for r in 0..n {
        for col in 0..n {
            let dot: C64 = (0..n).map(|k| m[k * n + r].conj() * m[k * n + col]).sum();
            let expect = if r == col { 1.0 } else { 0.0 };
            if (dot - expect).norm() > UNITARY_TOL {
                return Err(Error::InvalidCircuit("explicit gate matrix is not unitary".into()));
            }
        }
    }
    Ok(())
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GateKind::Rx(a) => write!(f, "rx({a})")?,
            GateKind::Ry(a) => write!(f, "ry({a})")?,
            GateKind::Rz(a) => write!(f, "rz({a})")?,
            GateKind::Phase(a) => write!(f, "phase({a})")?,
            GateKind::Unitary1(_) => write!(f, "u1")?,
            GateKind::Unitary2(_) => write!(f, "u2")?,
            k => write!(f, "{}", format!("{k:?}").to_lowercase())?,
        }
        write!(f, " {:?}", self.targets)?;
        if !self.controls.is_empty() {
            write!(f, " ctrl {:?}", self.controls)?;
        }
        Ok(())
    }
}

/// Ordered gate list over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Gates acting on two or more qubits.
    pub fn entangling_count(&self) -> usize {
        self.gates.iter().filter(|g| g.arity() >= 2).count()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    fn add(&mut self, kind: GateKind, targets: Vec<usize>) -> &mut Self {
        let gate = Gate::new(kind, targets);
        if let Err(e) = gate.validate(self.n_qubits) {
            panic!("{e}");
        }
        self.gates.push(gate);
        self
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.add(GateKind::X, vec![q])
    }
    pub fn h(&mut self, q: usize) -> &mut Self {
        self.add(GateKind::H, vec![q])
    }
    pub fn s(&mut self, q: usize) -> &mut Self {
        self.add(GateKind::S, vec![q])
    }
    pub fn sdg(&mut self, q: usize) -> &mut Self {
        self.add(GateKind::Sdg, vec![q])
    }
    pub fn rx(&mut self, q: usize, a: f64) -> &mut Self {
        self.add(GateKind::Rx(a), vec![q])
    }
    pub fn ry(&mut self, q: usize, a: f64) -> &mut Self {
        self.add(GateKind::Ry(a), vec![q])
    }
    pub fn rz(&mut self, q: usize, a: f64) -> &mut Self {
        self.add(GateKind::Rz(a), vec![q])
    }
    pub fn phase(&mut self, q: usize, a: f64) -> &mut Self {
        self.add(GateKind::Phase(a), vec![q])
    }
    pub fn cnot(&mut self, control: usize, target: usize) -> &mut Self {
        self.add(GateKind::Cnot, vec![control, target])
    }

    /// `e^{i angle}` on the whole register, emitted on qubit 0.
    pub fn global_phase(&mut self, angle: f64) -> &mut Self {
        let p = C64::from_polar(1.0, angle);
        let z = c(0.0, 0.0);
        self.add(GateKind::Unitary1([[p, z], [z, p]]), vec![0])
    }

    /// Appends all gates of `other`.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(self)
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        let mut out = self.clone();
        out.append(other)?;
        Ok(out)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} qubits, {} gates", self.n_qubits, self.gates.len())?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Reversed gate order with every gate conjugate-transposed.
pub fn adjoint(c: &Circuit) -> Circuit {
    Circuit {
        n_qubits: c.n_qubits,
        gates: c.gates.iter().rev().map(Gate::adjoint).collect(),
    }
}

/// `c` on qubits `1..=n`, applied only when the new qubit 0 is |1>.
pub fn controlled(c: &Circuit) -> Circuit {
    let gates = c
        .gates
        .iter()
        .map(|g| {
            let mut controls = vec![0];
            controls.extend(g.controls.iter().map(|q| q + 1));
            Gate {
                kind: g.kind.clone(),
                targets: g.targets.iter().map(|q| q + 1).collect(),
                controls,
            }
        })
        .collect();
    Circuit {
        n_qubits: c.n_qubits + 1,
        gates,
    }
}

/// Particle-number conserving two-qubit gate A(theta, phi): seven gates,
/// three of them CNOTs.
pub fn a_gate(theta: f64, phi: f64) -> Circuit {
    let mut c = Circuit::new(2);
    push_a_gate(&mut c, 0, 1, theta, phi);
    c
}

fn push_a_gate(c: &mut Circuit, a: usize, b: usize, theta: f64, phi: f64) {
    c.cnot(b, a)
        .rz(b, -(phi + PI))
        .ry(b, -(theta + FRAC_PI_2))
        .cnot(a, b)
        .ry(b, theta + FRAC_PI_2)
        .rz(b, phi + PI)
        .cnot(b, a);
}

/// Parameters of the linear-chain ansatz, ordered `(theta_1, phi_1, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSpec {
    n_orbitals: usize,
    params: Vec<f64>,
}

impl AnsatzSpec {
    pub fn new(n_orbitals: usize, params: Vec<f64>) -> Result<Self> {
        if n_orbitals == 0 {
            return Err(Error::InvalidCircuit("ansatz needs at least one qubit".into()));
        }
        let expected = Self::n_params(n_orbitals);
        if params.len() != expected {
            return Err(Error::ParameterLength {
                expected,
                got: params.len(),
            });
        }
        Ok(Self { n_orbitals, params })
    }

    pub fn n_params(n_orbitals: usize) -> usize {
        2 * n_orbitals.saturating_sub(1)
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Parameters whose ansatz state equals `amplitudes` (single-excitation
    /// amplitudes, one per orbital) up to a global phase.
    pub fn from_amplitudes(amplitudes: &[C64]) -> Result<Self> {
        let m = amplitudes.len();
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if m == 0 || norm == 0.0 {
            return Err(Error::InvalidCircuit("amplitudes must be a non-zero vector".into()));
        }
        let tiny = 1e-14;
        let mut amp: Vec<C64> = amplitudes.iter().map(|z| z / norm).collect();
        if amp[0].norm() > tiny {
            let g = -amp[0].conj() / amp[0].norm();
            amp.iter_mut().for_each(|z| *z *= g);
        }
        let mut params = Vec::with_capacity(Self::n_params(m));
        let mut prev_phase = 0.0;
        for j in 0..m.saturating_sub(1) {
            let tail: f64 = amp[j + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let theta = tail.atan2(amp[j].norm());
            let k = j + 1;
            let phase = if amp[k].norm() <= tiny {
                prev_phase
            } else if k + 1 < m {
                amp[k].arg() - PI
            } else {
                amp[k].arg()
            };
            params.push(theta);
            params.push(phase - prev_phase);
            prev_phase = phase;
        }
        Self::new(m, params)
    }
}

/// X on qubit 0, then A(theta_j, phi_j) on qubits (j-1, j) for j = 1..M-1.
pub fn build_ansatz(spec: &AnsatzSpec) -> Circuit {
    let m = spec.n_orbitals;
    let mut c = Circuit::new(m);
    c.x(0);
    for (j, pair) in spec.params.chunks(2).enumerate() {
        push_a_gate(&mut c, j, j + 1, pair[0], pair[1]);
    }
    c
}

/// Per-qubit rotation mapping `word` onto an I/Z-only word: H for X,
/// S-dagger then H for Y.
pub fn basis_rotation(word: &PauliWord) -> Circuit {
    let mut c = Circuit::new(word.n_qubits());
    for (q, p) in word.letters().iter().enumerate() {
        match p {
            Pauli::X => {
                c.h(q);
            }
            Pauli::Y => {
                c.sdg(q).h(q);
            }
            Pauli::I | Pauli::Z => {}
        }
    }
    c
}

/// `exp(i angle P)`: basis rotation, CNOT parity ladder, Rz, and uncompute.
pub fn word_exponential(word: &PauliWord, angle: f64) -> Circuit {
    let n = word.n_qubits();
    let mut c = Circuit::new(n);
    let support = word.support();
    if support.is_empty() {
        c.global_phase(angle);
        return c;
    }
    let rot = basis_rotation(word);
    c.append(&rot).expect("same width");
    for w in support.windows(2) {
        c.cnot(w[0], w[1]);
    }
    c.rz(*support.last().unwrap(), -2.0 * angle);
    for w in support.windows(2).rev() {
        c.cnot(w[0], w[1]);
    }
    c.append(&adjoint(&rot)).expect("same width");
    c
}

/// First-order product formula `(prod_i exp(i a_i P_i tau / n))^n`.
pub fn trotter_evolution(h: &PauliSum, tau: f64, slices: usize) -> Result<Circuit> {
    if slices == 0 {
        return Err(Error::InvalidCircuit("at least one Trotter slice is required".into()));
    }
    let dt = tau / slices as f64;
    let mut step = Circuit::new(h.n_qubits());
    for (coef, word) in h.terms() {
        step.append(&word_exponential(word, coef * dt))?;
    }
    let mut c = Circuit::new(h.n_qubits());
    for _ in 0..slices {
        c.append(&step)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjoint_of_simple_gates() {
        let mut c = Circuit::new(1);
        c.h(0);
        assert_eq!(adjoint(&c).gates()[0].kind, GateKind::H);
        let mut r = Circuit::new(1);
        r.rz(0, 0.3).s(0);
        let adj = adjoint(&r);
        assert_eq!(adj.gates()[0].kind, GateKind::Sdg);
        assert_eq!(adj.gates()[1].kind, GateKind::Rz(-0.3));
    }

    #[test]
    fn ansatz_shape() {
        for m in 1..=6 {
            let spec = AnsatzSpec::new(m, vec![0.1; AnsatzSpec::n_params(m)]).unwrap();
            let c = build_ansatz(&spec);
            assert_eq!(c.len(), 1 + 7 * (m - 1));
            assert_eq!(c.entangling_count(), 3 * (m - 1));
        }
        assert!(matches!(
            AnsatzSpec::new(3, vec![0.0; 3]),
            Err(Error::ParameterLength { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn basis_rotation_gates() {
        let rot = basis_rotation(&"XYZI".parse().unwrap());
        let kinds: Vec<_> = rot.gates().iter().map(|g| (g.kind.clone(), g.targets[0])).collect();
        assert_eq!(kinds, vec![(GateKind::H, 0), (GateKind::Sdg, 1), (GateKind::H, 1)]);
        assert!(basis_rotation(&"ZI".parse().unwrap()).is_empty());
    }

    #[test]
    fn invalid_gates_rejected() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::new(GateKind::Cnot, vec![1, 1])).is_err());
        assert!(c.push(Gate::new(GateKind::X, vec![2])).is_err());
        assert!(c.push(Gate::new(GateKind::Rx(f64::NAN), vec![0])).is_err());
        let bad = [[c64(1.0), c64(1.0)], [c64(0.0), c64(1.0)]];
        assert!(c.push(Gate::new(GateKind::Unitary1(bad), vec![0])).is_err());
        assert!(trotter_evolution(&PauliSum::from_terms(1, []).unwrap(), 1.0, 0).is_err());
    }

    fn c64(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn controlled_shifts_qubits() {
        let mut c = Circuit::new(2);
        c.cnot(0, 1);
        let cc = controlled(&c);
        assert_eq!(cc.n_qubits(), 3);
        assert_eq!(cc.gates()[0].targets, vec![1, 2]);
        assert_eq!(cc.gates()[0].controls, vec![0]);
    }

    #[test]
    fn dump_lists_one_gate_per_line() {
        let text = a_gate(0.1, 0.2).to_string();
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().nth(1).unwrap().starts_with("cnot [1, 0]"));
    }
}
