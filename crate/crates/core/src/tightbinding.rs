//! Periodic tight-binding models, Bloch matrices, k-paths and the classical
//! exact-diagonalization oracle.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bands::{BandEnergy, BandRow, BandTable, Provenance};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};

pub type Vec3 = [f64; 3];

/// Grid used to compare displacement vectors.
const DELTA_GRID: f64 = 1e9;
const AMPLITUDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbital {
    pub label: String,
    /// Fractional position in the unit cell.
    pub position: Vec3,
}

/// A hopping `t` that moves an electron from orbital `beta` to orbital
/// `alpha`, where `delta` is the position of `alpha` minus that of `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub alpha: usize,
    pub beta: usize,
    pub delta: Vec3,
    pub t: C64,
}

impl Hopping {
    pub fn new(alpha: usize, beta: usize, delta: Vec3, t: C64) -> Self {
        Self { alpha, beta, delta, t }
    }

    pub fn real(alpha: usize, beta: usize, delta: Vec3, t: f64) -> Self {
        Self::new(alpha, beta, delta, C64::new(t, 0.0))
    }

    pub fn onsite(alpha: usize, energy: f64) -> Self {
        Self::real(alpha, alpha, [0.0; 3], energy)
    }

    fn is_onsite(&self) -> bool {
        self.alpha == self.beta && self.delta.iter().all(|d| d.abs() * DELTA_GRID < 0.5)
    }

    fn key(&self) -> HopKey {
        (self.alpha, self.beta, grid(self.delta))
    }

    fn adjoint(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
            delta: self.delta.map(|d| -d),
            t: self.t.conj(),
        }
    }
}

type HopKey = (usize, usize, [i64; 3]);

fn grid(v: Vec3) -> [i64; 3] {
    v.map(|d| (d * DELTA_GRID).round() as i64)
}

fn same_amplitude(a: C64, b: C64) -> bool {
    (a - b).norm() <= AMPLITUDE_TOL * a.norm().max(b.norm()).max(1.0)
}

/// Lattice, orbitals and displacement-indexed hoppings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightBindingModel {
    lattice_vectors: [Vec3; 3],
    orbitals: Vec<Orbital>,
    hoppings: Vec<Hopping>,
    closed: bool,
}

impl TightBindingModel {
    /// Validates indices and onsite reality, merges exact duplicates and
    /// rejects conflicting ones.
    pub fn new(lattice_vectors: [Vec3; 3], orbitals: Vec<Orbital>, hoppings: Vec<Hopping>) -> Result<Self> {
        let m = orbitals.len();
        if m == 0 {
            return Err(Error::InvalidModel("model needs at least one orbital".into()));
        }
        let mut seen: HashMap<HopKey, C64> = HashMap::new();
        let mut kept = Vec::with_capacity(hoppings.len());
        for h in hoppings {
            if h.alpha >= m || h.beta >= m {
                return Err(Error::InvalidModel(format!(
                    "hopping ({}, {}) references an orbital outside [0, {m})",
                    h.alpha, h.beta
                )));
            }
            if !(h.t.re.is_finite() && h.t.im.is_finite()) || h.delta.iter().any(|d| !d.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "hopping ({}, {}) has a non-finite value",
                    h.alpha, h.beta
                )));
            }
            if h.is_onsite() && h.t.im.abs() > AMPLITUDE_TOL * h.t.norm().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "onsite energy of orbital {} must be real, got {}",
                    h.alpha, h.t
                )));
            }
            match seen.get(&h.key()) {
                Some(prev) if same_amplitude(*prev, h.t) => continue,
                Some(prev) => {
                    return Err(Error::ConflictingHopping {
                        alpha: h.alpha,
                        beta: h.beta,
                        delta: h.delta,
                        first: prev.to_string(),
                        second: h.t.to_string(),
                    })
                }
                None => {
                    seen.insert(h.key(), h.t);
                    kept.push(h);
                }
            }
        }
        let closed = kept.iter().all(|h| {
            seen.get(&h.adjoint().key())
                .is_some_and(|t| same_amplitude(*t, h.t.conj()))
        });
        Ok(Self {
            lattice_vectors,
            orbitals,
            hoppings: kept,
            closed,
        })
    }

    /// Adds every missing adjoint hopping so the hopping set is self-adjoint.
    pub fn close_hermitian(&self) -> Result<Self> {
        let index: HashMap<HopKey, C64> = self.hoppings.iter().map(|h| (h.key(), h.t)).collect();
        let mut hoppings = self.hoppings.clone();
        let mut added: HashMap<HopKey, C64> = HashMap::new();
        for h in &self.hoppings {
            let adj = h.adjoint();
            match index.get(&adj.key()).or_else(|| added.get(&adj.key())) {
                Some(t) if same_amplitude(*t, adj.t) => {}
                Some(t) => {
                    return Err(Error::ConflictingHopping {
                        alpha: adj.alpha,
                        beta: adj.beta,
                        delta: adj.delta,
                        first: t.to_string(),
                        second: adj.t.to_string(),
                    })
                }
                None => {
                    added.insert(adj.key(), adj.t);
                    hoppings.push(adj);
                }
            }
        }
        Ok(Self {
            lattice_vectors: self.lattice_vectors,
            orbitals: self.orbitals.clone(),
            hoppings,
            closed: true,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn n_orbitals(&self) -> usize {
        self.orbitals.len()
    }

    pub fn orbitals(&self) -> &[Orbital] {
        &self.orbitals
    }

    pub fn hoppings(&self) -> &[Hopping] {
        &self.hoppings
    }

    pub fn lattice_vectors(&self) -> &[Vec3; 3] {
        &self.lattice_vectors
    }

    /// Reciprocal lattice vectors `b_i` with `a_i . b_j = 2 pi delta_ij`.
    pub fn reciprocal_vectors(&self) -> Result<[Vec3; 3]> {
        let [a1, a2, a3] = self.lattice_vectors;
        let volume = dot(a1, cross(a2, a3));
        if volume.abs() < 1e-12 {
            return Err(Error::InvalidModel("lattice vectors are linearly dependent".into()));
        }
        let s = 2.0 * PI / volume;
        Ok([
            cross(a2, a3).map(|x| x * s),
            cross(a3, a1).map(|x| x * s),
            cross(a1, a2).map(|x| x * s),
        ])
    }

    /// `H(k)_{ab} = sum_delta t_ab^(delta) exp(i k . delta)`.
    pub fn bloch_matrix(&self, k: Vec3) -> Result<HermitianMatrix> {
        if !self.closed {
            return Err(Error::NotClosed);
        }
        let m = self.n_orbitals();
        let mut data = vec![C64::new(0.0, 0.0); m * m];
        for h in &self.hoppings {
            data[h.alpha * m + h.beta] += h.t * C64::from_polar(1.0, dot(k, h.delta));
        }
        // remove rounding-level asymmetry from the phase sums
        for r in 0..m {
            data[r * m + r].im = 0.0;
            for c in r + 1..m {
                let avg = 0.5 * (data[r * m + c] + data[c * m + r].conj());
                data[r * m + c] = avg;
                data[c * m + r] = avg.conj();
            }
        }
        HermitianMatrix::new(m, data)
    }
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn distance(a: Vec3, b: Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    dot(d, d).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KAnchor {
    pub label: String,
    pub k: Vec3,
}

impl KAnchor {
    pub fn new(label: impl Into<String>, k: Vec3) -> Self {
        Self { label: label.into(), k }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: Vec3,
    /// Cumulative distance along the path.
    pub distance: f64,
    /// Set on anchor points.
    pub label: Option<String>,
}

/// Piecewise-linear path through reciprocal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KPath {
    anchors: Vec<KAnchor>,
    points_per_segment: usize,
    points: Vec<KPoint>,
}

impl KPath {
    /// Each segment contributes `points_per_segment` points (its start anchor
    /// included, its end anchor excluded); the final anchor closes the path.
    pub fn resolve(anchors: Vec<KAnchor>, points_per_segment: usize) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::InvalidKPath("a path needs at least two anchors".into()));
        }
        if points_per_segment == 0 {
            return Err(Error::InvalidKPath("points_per_segment must be positive".into()));
        }
        let mut points = Vec::with_capacity((anchors.len() - 1) * points_per_segment + 1);
        let mut travelled = 0.0;
        for pair in anchors.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let length = distance(a.k, b.k);
            if length < 1e-12 {
                return Err(Error::InvalidKPath(format!(
                    "consecutive anchors {} and {} coincide",
                    a.label, b.label
                )));
            }
            for j in 0..points_per_segment {
                let f = j as f64 / points_per_segment as f64;
                points.push(KPoint {
                    k: [0, 1, 2].map(|i| a.k[i] + f * (b.k[i] - a.k[i])),
                    distance: travelled + f * length,
                    label: (j == 0).then(|| a.label.clone()),
                });
            }
            travelled += length;
        }
        let last = anchors.last().unwrap();
        points.push(KPoint {
            k: last.k,
            distance: travelled,
            label: Some(last.label.clone()),
        });
        Ok(Self {
            anchors,
            points_per_segment,
            points,
        })
    }

    /// Path with `interior` points strictly between consecutive anchors.
    pub fn with_interior_points(anchors: Vec<KAnchor>, interior: usize) -> Result<Self> {
        Self::resolve(anchors, interior + 1)
    }

    pub fn points(&self) -> &[KPoint] {
        &self.points
    }

    pub fn anchors(&self) -> &[KAnchor] {
        &self.anchors
    }

    pub fn points_per_segment(&self) -> usize {
        self.points_per_segment
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ascending eigenvalues of `H(k)` at every path point.
pub fn exact_bands(model: &TightBindingModel, path: &KPath) -> Result<BandTable> {
    let mut rows = Vec::with_capacity(path.len());
    for (i, p) in path.points().iter().enumerate() {
        let energies = model
            .bloch_matrix(p.k)?
            .eigenvalues()
            .into_iter()
            .map(|e| BandEnergy::plain(e, Provenance::Exact))
            .collect();
        rows.push(BandRow::new(i, p, energies));
    }
    Ok(BandTable::new(model.n_orbitals(), rows))
}

/// High-symmetry points X, M, Gamma of a simple cubic lattice with constant `a`.
pub fn simple_cubic_xmg(a: f64) -> Vec<KAnchor> {
    let q = PI / a;
    vec![
        KAnchor::new("X", [q, 0.0, 0.0]),
        KAnchor::new("M", [q, q, 0.0]),
        KAnchor::new("G", [0.0, 0.0, 0.0]),
    ]
}

/// Onsite energy of the s orbital in the bundled model (eV).
pub const POLONIUM_S_ONSITE: f64 = -14.0;
/// s-p and colinear p-p hopping magnitude in the bundled model (eV).
pub const POLONIUM_HOPPING: f64 = 2.0;
/// Lattice constant of the bundled model (Angstrom).
pub const POLONIUM_LATTICE: f64 = 3.35;

/// Simple-cubic s + p model: one s and three p orbitals per site, nearest
/// neighbour s-p (sigma) and colinear p-p (sigma) hoppings of 2 eV, s onsite
/// -14 eV. Already hermitian-closed.
pub fn polonium() -> TightBindingModel {
    let a = POLONIUM_LATTICE;
    let orbitals = ["s", "px", "py", "pz"]
        .iter()
        .map(|l| Orbital {
            label: l.to_string(),
            position: [0.0; 3],
        })
        .collect();
    let mut hoppings = vec![Hopping::onsite(0, POLONIUM_S_ONSITE)];
    for p in 1..4 {
        hoppings.push(Hopping::onsite(p, 0.0));
    }
    for axis in 0..3 {
        let p = axis + 1;
        for sign in [1.0, -1.0] {
            let mut delta = [0.0; 3];
            delta[axis] = sign * a;
            // <s|H|p> = l V_sp_sigma with l the cosine of the s -> p bond,
            // which points along -delta for t_{s p}^(delta).
            hoppings.push(Hopping::real(0, p, delta, -sign * POLONIUM_HOPPING));
            hoppings.push(Hopping::real(p, 0, delta, sign * POLONIUM_HOPPING));
            hoppings.push(Hopping::real(p, p, delta, POLONIUM_HOPPING));
        }
    }
    TightBindingModel::new(
        [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
        orbitals,
        hoppings,
    )
    .expect("bundled model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_s(eps: f64, t: f64, a: f64) -> TightBindingModel {
        let mut hops = vec![Hopping::onsite(0, eps)];
        for axis in 0..3 {
            for s in [1.0, -1.0] {
                let mut d = [0.0; 3];
                d[axis] = s * a;
                hops.push(Hopping::real(0, 0, d, t));
            }
        }
        TightBindingModel::new(
            [[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]],
            vec![Orbital { label: "s".into(), position: [0.0; 3] }],
            hops,
        )
        .unwrap()
    }

    fn two_orbitals(hops: Vec<Hopping>) -> TightBindingModel {
        let orbs = (0..2)
            .map(|i| Orbital { label: format!("o{i}"), position: [0.0; 3] })
            .collect();
        TightBindingModel::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], orbs, hops).unwrap()
    }

    #[test]
    fn closure_adds_adjoint_of_real_hop() {
        let d = [1.0, 0.0, 0.0];
        let m = two_orbitals(vec![Hopping::real(0, 1, d, 2.0)]);
        assert!(!m.is_closed());
        let closed = m.close_hermitian().unwrap();
        assert_eq!(
            closed.hoppings(),
            &[Hopping::real(0, 1, d, 2.0), Hopping::real(1, 0, [-1.0, 0.0, 0.0], 2.0)]
        );
    }

    #[test]
    fn closure_conjugates_complex_hop() {
        let d = [0.0, 1.0, 0.0];
        let m = two_orbitals(vec![Hopping::new(0, 1, d, C64::new(0.0, 1.0))]);
        let closed = m.close_hermitian().unwrap();
        assert_eq!(closed.hoppings()[1], Hopping::new(1, 0, [0.0, -1.0, 0.0], C64::new(0.0, -1.0)));
    }

    #[test]
    fn closure_is_idempotent() {
        let d = [1.0, 0.0, 0.0];
        let once = two_orbitals(vec![Hopping::real(0, 1, d, 2.0), Hopping::onsite(1, 3.0)])
            .close_hermitian()
            .unwrap();
        let twice = once.close_hermitian().unwrap();
        assert_eq!(once, twice);
        let rebuilt = TightBindingModel::new(
            *once.lattice_vectors(),
            once.orbitals().to_vec(),
            once.hoppings().to_vec(),
        )
        .unwrap();
        assert!(rebuilt.is_closed());
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let d = [1.0, 0.0, 0.0];
        let orbs = (0..2)
            .map(|i| Orbital { label: format!("o{i}"), position: [0.0; 3] })
            .collect();
        let err = TightBindingModel::new(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            orbs,
            vec![Hopping::real(0, 1, d, 2.0), Hopping::real(0, 1, d, 3.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConflictingHopping { alpha: 0, beta: 1, .. }));

        // inconsistent adjoint pair
        let m = two_orbitals(vec![
            Hopping::real(0, 1, d, 2.0),
            Hopping::real(1, 0, [-1.0, 0.0, 0.0], 5.0),
        ]);
        assert!(matches!(m.close_hermitian(), Err(Error::ConflictingHopping { .. })));
    }

    #[test]
    fn invalid_models_rejected() {
        let lat = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(TightBindingModel::new(lat, vec![], vec![]).is_err());
        let orb = vec![Orbital { label: "s".into(), position: [0.0; 3] }];
        assert!(TightBindingModel::new(lat, orb.clone(), vec![Hopping::real(0, 1, [1.0, 0.0, 0.0], 1.0)]).is_err());
        assert!(TightBindingModel::new(lat, orb, vec![Hopping::new(0, 0, [0.0; 3], C64::new(1.0, 0.5))]).is_err());
    }

    #[test]
    fn bloch_requires_closure() {
        let m = two_orbitals(vec![Hopping::real(0, 1, [1.0, 0.0, 0.0], 2.0)]);
        assert!(matches!(m.bloch_matrix([0.0; 3]), Err(Error::NotClosed)));
    }

    #[test]
    fn simple_cubic_band_edges() {
        let (eps, t, a) = (0.3, -1.1, 2.0);
        let m = single_s(eps, t, a);
        let h0 = m.bloch_matrix([0.0; 3]).unwrap();
        assert!((h0.get(0, 0).re - (eps + 6.0 * t)).abs() < 1e-12);
        let q = PI / a;
        let hr = m.bloch_matrix([q, q, q]).unwrap();
        assert!((hr.get(0, 0).re - (eps - 6.0 * t)).abs() < 1e-12);
    }

    #[test]
    fn kpath_midpoint_and_counts() {
        let path = KPath::resolve(
            vec![KAnchor::new("G", [0.0; 3]), KAnchor::new("X", [1.0, 0.0, 0.0])],
            2,
        )
        .unwrap();
        let ks: Vec<Vec3> = path.points().iter().map(|p| p.k).collect();
        assert_eq!(ks, vec![[0.0; 3], [0.5, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let one_interior = KPath::with_interior_points(
            vec![KAnchor::new("G", [0.0; 3]), KAnchor::new("X", [1.0, 0.0, 0.0])],
            1,
        )
        .unwrap();
        assert_eq!(one_interior.len(), 3);
    }

    #[test]
    fn kpath_visits_xmg_in_order() {
        let a = 1.7;
        let anchors = simple_cubic_xmg(a);
        let path = KPath::with_interior_points(anchors.clone(), 5).unwrap();
        let labelled: Vec<(&str, Vec3)> = path
            .points()
            .iter()
            .filter_map(|p| p.label.as_deref().map(|l| (l, p.k)))
            .collect();
        assert_eq!(labelled.len(), 3);
        for ((l, k), anchor) in labelled.iter().zip(&anchors) {
            assert_eq!(*l, anchor.label);
            assert_eq!(*k, anchor.k);
        }
        for w in path.points().windows(2) {
            assert!(w[1].distance > w[0].distance);
        }
        // equal spacing within a segment
        let d: Vec<f64> = path.points().windows(2).map(|w| w[1].distance - w[0].distance).collect();
        for s in &d[..6] {
            assert!((s - d[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn kpath_rejects_bad_anchors() {
        assert!(KPath::resolve(vec![KAnchor::new("G", [0.0; 3])], 3).is_err());
        let dup = vec![KAnchor::new("G", [0.0; 3]), KAnchor::new("G2", [0.0; 3])];
        assert!(matches!(KPath::resolve(dup, 3), Err(Error::InvalidKPath(_))));
    }

    #[test]
    fn exact_bands_scalar_and_diagonal() {
        let m = single_s(-2.0, 0.0, 1.0);
        let path = KPath::resolve(simple_cubic_xmg(1.0), 1).unwrap();
        let table = exact_bands(&m, &path).unwrap();
        for row in &table.rows {
            assert_eq!(row.values().unwrap(), vec![-2.0]);
        }
    }

    #[test]
    fn polonium_high_symmetry_points_are_diagonal() {
        let m = polonium();
        assert!(m.is_closed());
        let a = POLONIUM_LATTICE;
        let q = PI / a;
        for (k, expect) in [
            ([0.0, 0.0, 0.0], [-14.0, 4.0, 4.0, 4.0]),
            ([q, 0.0, 0.0], [-14.0, -4.0, 4.0, 4.0]),
            ([q, q, 0.0], [-14.0, -4.0, -4.0, 4.0]),
        ] {
            let h = m.bloch_matrix(k).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    if r != c {
                        assert!(h.get(r, c).norm() < 1e-12);
                    }
                }
            }
            let e = h.eigenvalues();
            for (x, y) in e.iter().zip(expect) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
