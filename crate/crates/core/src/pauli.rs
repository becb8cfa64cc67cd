//! Pauli words, weighted Pauli sums, the single-particle orbital-to-qubit
//! mapping and qubit-wise commuting partitions.
//!
//! Qubit 0 is the leftmost letter of a word and the most significant bit of
//! a computational-basis index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};

/// Terms with smaller magnitude are dropped from sums.
pub const PRUNE_TOL: f64 = 1e-14;
/// Largest qubit count accepted by [`matrix_of`].
pub const DENSE_QUBIT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliWord(Vec<Pauli>);

impl PauliWord {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self(letters)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    /// Identity everywhere except the listed `(qubit, letter)` pairs.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Self {
        let mut w = vec![Pauli::I; n];
        for &(q, p) in ops {
            w[q] = p;
        }
        Self(w)
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.0
    }

    pub fn get(&self, q: usize) -> Pauli {
        self.0[q]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&q| self.0[q] != Pauli::I).collect()
    }

    /// True iff at every qubit the letters agree or one of them is I.
    pub fn qubitwise_commutes(&self, other: &PauliWord) -> bool {
        assert_eq!(self.n_qubits(), other.n_qubits(), "word lengths differ");
        self.0
            .iter()
            .zip(&other.0)
            .all(|(a, b)| a == b || *a == Pauli::I || *b == Pauli::I)
    }

    pub fn action(&self) -> WordAction {
        let n = self.0.len();
        let mut a = WordAction {
            flip: 0,
            sign: 0,
            support: 0,
            y_count: 0,
        };
        for (q, p) in self.0.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => a.flip |= bit,
                Pauli::Y => {
                    a.flip |= bit;
                    a.sign |= bit;
                    a.y_count += 1;
                }
                Pauli::Z => a.sign |= bit,
            }
            if *p != Pauli::I {
                a.support |= bit;
            }
        }
        a
    }
}

/// Bit-mask form of a word: `P|i> = phase(i) |i ^ flip>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordAction {
    pub flip: usize,
    pub sign: usize,
    pub support: usize,
    pub y_count: u32,
}

impl WordAction {
    pub fn phase(&self, basis: usize) -> C64 {
        let base = match self.y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if (basis & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }

    /// +-1 eigenvalue of the basis-rotated (I/Z-only) word on a measured bitstring.
    pub fn rotated_eigenvalue(&self, bits: usize) -> f64 {
        if (bits & self.support).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidPauli(format!("letter '{other}' in '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliWord)
    }
}

/// Real-weighted sum of Pauli words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliWord)>,
}

impl PauliSum {
    /// Duplicate words are merged at the position of their first occurrence,
    /// then near-zero terms are dropped.
    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliWord)>) -> Result<Self> {
        let mut merged: Vec<(f64, PauliWord)> = Vec::new();
        let mut index = std::collections::HashMap::<PauliWord, usize>::new();
        for (c, w) in terms {
            if w.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch {
                    expected: n_qubits,
                    got: w.n_qubits(),
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidPauli(format!("non-finite coefficient on {w}")));
            }
            match index.get(&w) {
                Some(&i) => merged[i].0 += c,
                None => {
                    index.insert(w.clone(), merged.len());
                    merged.push((c, w));
                }
            }
        }
        merged.retain(|(c, _)| c.abs() >= PRUNE_TOL);
        Ok(Self { n_qubits, terms: merged })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliWord)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the identity word.
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, w)| w.is_identity())
            .map(|(c, _)| c)
            .sum()
    }

    /// `scale * self + shift * I`.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, w)| (scale * c, w.clone()))
            .chain(std::iter::once((shift, PauliWord::identity(self.n_qubits))));
        Self::from_terms(self.n_qubits, terms).expect("same qubit count")
    }

    /// Same terms, stably reordered by qubit support so that words acting on
    /// the same qubits are adjacent.
    pub fn grouped_by_support(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|(_, w)| (w.support().len(), w.support()));
        Self {
            n_qubits: self.n_qubits,
            terms,
        }
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (c, w)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*{w}")?;
        }
        Ok(())
    }
}

/// Maps the Hermitian matrix of a single-particle Hamiltonian onto qubits,
/// one qubit per orbital:
/// `H_aa/2 (I - Z_a)`, `Re H_ab/2 (X_a X_b + Y_a Y_b)` and
/// `Im H_ab/2 (Y_a X_b - X_a Y_b)` for `b > a`.
///
/// Terms are emitted as identity, Z family, then XX, YY, YX and XY families.
pub fn map_hamiltonian(h: &HermitianMatrix) -> Result<PauliSum> {
    let m = h.dim();
    // re-validate: a HermitianMatrix can only be built Hermitian, but keep the
    // contract explicit for matrices deserialized from elsewhere
    HermitianMatrix::new(m, h.as_slice().to_vec())?;
    let mut terms = Vec::with_capacity(1 + m + 2 * m * m);
    let trace: f64 = (0..m).map(|a| h.get(a, a).re).sum();
    terms.push((0.5 * trace, PauliWord::identity(m)));
    for a in 0..m {
        terms.push((-0.5 * h.get(a, a).re, PauliWord::from_sparse(m, &[(a, Pauli::Z)])));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    let families: [(Pauli, Pauli, fn(C64) -> f64); 4] = [
        (Pauli::X, Pauli::X, |z| 0.5 * z.re),
        (Pauli::Y, Pauli::Y, |z| 0.5 * z.re),
        (Pauli::Y, Pauli::X, |z| 0.5 * z.im),
        (Pauli::X, Pauli::Y, |z| -0.5 * z.im),
    ];
    for (pa, pb, coef) in families {
        for &(a, b) in &pairs {
            terms.push((coef(h.get(a, b)), PauliWord::from_sparse(m, &[(a, pa), (b, pb)])));
        }
    }
    PauliSum::from_terms(m, terms)
}

/// Groups of term indices whose words are pairwise qubit-wise commuting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutingPartition {
    pub groups: Vec<Vec<usize>>,
}

impl CommutingPartition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups that contain at least one non-identity word, i.e. the ones
    /// that need a measurement ensemble.
    pub fn measured_groups(&self, sum: &PauliSum) -> usize {
        self.groups
            .iter()
            .filter(|g| g.iter().any(|&i| !sum.terms()[i].1.is_identity()))
            .count()
    }
}

/// Greedy first-fit partition in term order.
pub fn partition(sum: &PauliSum) -> CommutingPartition {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, (_, w)) in sum.terms().iter().enumerate() {
        let slot = groups
            .iter()
            .position(|g| g.iter().all(|&j| sum.terms()[j].1.qubitwise_commutes(w)));
        match slot {
            Some(g) => groups[g].push(i),
            None => groups.push(vec![i]),
        }
    }
    CommutingPartition { groups }
}

/// Normalized sum of all I/Z words; its expectation is the probability of
/// measuring the all-zero bitstring.
pub fn omega0(n: usize) -> PauliSum {
    assert!(n >= 1, "omega0 needs at least one qubit");
    let weight = 1.0 / (1u64 << n) as f64;
    let terms = (0..1usize << n).map(|mask| {
        let letters = (0..n)
            .map(|q| if mask >> (n - 1 - q) & 1 == 1 { Pauli::Z } else { Pauli::I })
            .collect();
        (weight, PauliWord::new(letters))
    });
    PauliSum::from_terms(n, terms).expect("consistent lengths")
}

/// Dense `2^n x 2^n` matrix of a sum.
pub fn matrix_of(sum: &PauliSum) -> Result<HermitianMatrix> {
    let n = sum.n_qubits();
    if n > DENSE_QUBIT_CAP {
        return Err(Error::TooManyQubits(n, DENSE_QUBIT_CAP));
    }
    let dim = 1usize << n;
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    for (c, w) in sum.terms() {
        let act = w.action();
        for i in 0..dim {
            data[(i ^ act.flip) * dim + i] += act.phase(i) * c;
        }
    }
    HermitianMatrix::new(dim, data)
}

/// Basis index of the state with a single excitation on `qubit`.
pub fn single_excitation_index(n: usize, qubit: usize) -> usize {
    1usize << (n - 1 - qubit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    fn as_map(sum: &PauliSum) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = sum.terms().iter().map(|(c, w)| (w.to_string(), *c)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn word_text_round_trip() {
        assert_eq!(w("IXYZ").to_string(), "IXYZ");
        assert!("IXQ".parse::<PauliWord>().is_err());
    }

    #[test]
    fn scalar_mapping() {
        let h = HermitianMatrix::diagonal(&[3.0]);
        assert_eq!(as_map(&map_hamiltonian(&h).unwrap()), vec![("I".into(), 1.5), ("Z".into(), -1.5)]);
    }

    #[test]
    fn real_offdiagonal_mapping() {
        let h = HermitianMatrix::from_fn(2, |r, c| if r != c { C64::new(0.7, 0.0) } else { C64::new(0.0, 0.0) }).unwrap();
        assert_eq!(as_map(&map_hamiltonian(&h).unwrap()), vec![("XX".into(), 0.35), ("YY".into(), 0.35)]);
    }

    #[test]
    fn imaginary_offdiagonal_mapping() {
        let hval = 0.9;
        let h = HermitianMatrix::new(
            2,
            vec![C64::new(0.0, 0.0), C64::new(0.0, hval), C64::new(0.0, -hval), C64::new(0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(
            as_map(&map_hamiltonian(&h).unwrap()),
            vec![("XY".into(), -0.45), ("YX".into(), 0.45)]
        );
    }

    #[test]
    fn qubitwise_rule() {
        assert!(w("XX").qubitwise_commutes(&w("XI")));
        assert!(!w("XX").qubitwise_commutes(&w("YY")));
        assert!(w("ZI").qubitwise_commutes(&w("IZ")));
    }

    #[test]
    fn singleton_partition() {
        let s = PauliSum::from_terms(2, [(1.0, w("XY"))]).unwrap();
        assert_eq!(partition(&s).groups, vec![vec![0]]);
    }

    #[test]
    fn merges_and_prunes() {
        let s = PauliSum::from_terms(1, [(1.0, w("Z")), (0.5, w("X")), (-1.0, w("Z"))]).unwrap();
        assert_eq!(as_map(&s), vec![("X".into(), 0.5)]);
        let tiny = PauliSum::from_terms(1, [(1e-15, w("Z"))]).unwrap();
        assert!(tiny.is_empty());
        assert!(PauliSum::from_terms(2, [(1.0, w("Z"))]).is_err());
    }

    #[test]
    fn omega0_shapes() {
        let o1 = omega0(1);
        assert_eq!(as_map(&o1), vec![("I".into(), 0.5), ("Z".into(), 0.5)]);
        let o2 = omega0(2);
        assert_eq!(o2.len(), 4);
        assert!(o2.terms().iter().all(|(c, _)| *c == 0.25));
        assert_eq!(partition(&o2).len(), 1);
        // |11> is orthogonal to |00>
        let m = matrix_of(&o2).unwrap();
        assert!(m.get(3, 3).norm() < 1e-15);
        assert!((m.get(0, 0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_matrices() {
        let z = matrix_of(&PauliSum::from_terms(1, [(1.0, w("Z"))]).unwrap()).unwrap();
        assert_eq!(z, HermitianMatrix::diagonal(&[1.0, -1.0]));
        let xx = matrix_of(&PauliSum::from_terms(2, [(1.0, w("XX"))]).unwrap()).unwrap();
        for (r, c) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            assert_eq!(xx.get(r, c), C64::new(1.0, 0.0));
        }
        assert_eq!(xx.get(0, 0), C64::new(0.0, 0.0));
        let big = PauliSum::from_terms(13, [(1.0, PauliWord::identity(13))]).unwrap();
        assert!(matches!(matrix_of(&big), Err(Error::TooManyQubits(13, 12))));
    }

    #[test]
    fn y_phase_convention() {
        // Y|0> = i|1>, qubit 0 is the most significant bit
        let y = matrix_of(&PauliSum::from_terms(1, [(1.0, w("Y"))]).unwrap()).unwrap();
        assert_eq!(y.get(1, 0), C64::new(0.0, 1.0));
        assert_eq!(y.get(0, 1), C64::new(0.0, -1.0));
        let zi = matrix_of(&PauliSum::from_terms(2, [(1.0, w("ZI"))]).unwrap()).unwrap();
        assert_eq!(zi.get(2, 2), C64::new(-1.0, 0.0));
        assert_eq!(zi.get(1, 1), C64::new(1.0, 0.0));
    }
}
