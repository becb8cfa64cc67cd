//! Dense Hermitian matrices and the in-repo eigensolver.
//!
//! The solver reduces a complex Hermitian matrix to real symmetric
//! tridiagonal form with Householder reflections followed by a diagonal
//! phase gauge, then diagonalizes the tridiagonal matrix with the implicit
//! QL algorithm (Wilkinson shifts), accumulating eigenvectors throughout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix that is Hermitian to within [`HERMITIAN_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix {
    dim: usize,
    /// Row-major entries.
    data: Vec<C64>,
}

impl HermitianMatrix {
    /// Validate and wrap row-major entries.
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Parse(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        let scale = data.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let mut worst = 0.0_f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (data[r * dim + c] - data[c * dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(worst / scale));
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self::new(dim, data)
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![ZERO; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = C64::new(*v, 0.0);
        }
        Self { dim: n, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r)).expect("transpose of a Hermitian matrix")
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        (0..n)
            .map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum())
            .collect()
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values
    }

    /// Full eigendecomposition, eigenvalues ascending.
    pub fn eigh(&self) -> Eigen {
        hermitian_eigen(self)
    }
}

/// Eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<C64>>,
}

fn hermitian_eigen(h: &HermitianMatrix) -> Eigen {
    let n = h.dim;
    if n == 0 {
        return Eigen {
            values: vec![],
            vectors: vec![],
        };
    }
    let mut a = h.data.clone();
    // q accumulates the product of reflections, row-major
    let mut q = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = ONE;
    }

    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|r| a[r * n + k]).collect();
        let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let alpha = (x[0].norm_sqr() + tail).sqrt();
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let mut v = vec![ZERO; n];
        for (i, xi) in x.iter().enumerate() {
            v[k + 1 + i] = *xi;
        }
        v[k + 1] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let beta = 2.0 / vnorm2;

        // p = beta * A v
        let p: Vec<C64> = (0..n)
            .map(|r| beta * (0..n).map(|c| a[r * n + c] * v[c]).sum::<C64>())
            .collect();
        // K = (beta / 2) v^H p
        let kk: C64 = 0.5 * beta * v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum::<C64>();
        let w: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] -= w[r] * v[c].conj() + v[r] * w[c].conj();
            }
        }
        // Q <- Q (I - beta v v^H)
        for r in 0..n {
            let qv: C64 = (0..n).map(|c| q[r * n + c] * v[c]).sum();
            for c in 0..n {
                q[r * n + c] -= beta * qv * v[c].conj();
            }
        }
    }

    let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut off = vec![0.0; n];
    // gauge the complex subdiagonal to real non-negative values
    let mut gauge = vec![ONE; n];
    for i in 0..n - 1 {
        let e = a[(i + 1) * n + i];
        off[i] = e.norm();
        gauge[i + 1] = if off[i] > 0.0 { gauge[i] * e / off[i] } else { gauge[i] };
    }
    for r in 0..n {
        for c in 0..n {
            q[r * n + c] *= gauge[c];
        }
    }

    implicit_ql(&mut diag, &mut off, &mut q, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| q[r * n + i]).collect())
        .collect();
    Eigen { values, vectors }
}

/// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
/// `off[i]` couples `diag[i]` and `diag[i + 1]`; rotations are applied to the
/// columns of the row-major `z`.
fn implicit_ql(diag: &mut [f64], off: &mut [f64], z: &mut [C64], n: usize) {
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations <= 200, "implicit QL failed to converge");

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

/// Dense square complex matrix used for unitaries and test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Self { dim, data }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        Self { dim: n, data }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        (0..n)
            .map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum())
            .collect()
    }

    /// Spectral norm, via the largest eigenvalue of `A^H A`.
    pub fn op_norm(&self) -> f64 {
        let gram = self.adjoint().matmul(self);
        let h = HermitianMatrix {
            dim: self.dim,
            data: symmetrize(&gram.data, self.dim),
        };
        h.eigenvalues().last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Distance to `other` minimized over a global phase, in spectral norm.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap: C64 = other
            .data
            .iter()
            .zip(&self.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        let scaled = Self {
            dim: other.dim,
            data: other.data.iter().map(|z| z * phase).collect(),
        };
        self.sub(&scaled).op_norm()
    }

    /// `exp(i t H)` for Hermitian `H`, through its eigendecomposition.
    pub fn exp_i_hermitian(h: &HermitianMatrix, t: f64) -> Self {
        let eig = h.eigh();
        let n = h.dim();
        let mut data = vec![ZERO; n * n];
        for (val, vec) in eig.values.iter().zip(&eig.vectors) {
            let ph = C64::from_polar(1.0, val * t);
            for r in 0..n {
                let a = ph * vec[r];
                for c in 0..n {
                    data[r * n + c] += a * vec[c].conj();
                }
            }
        }
        Self { dim: n, data }
    }

    /// Largest deviation of `A^H A` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .sub(&Self::identity(self.dim))
            .data
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

fn symmetrize(data: &[C64], n: usize) -> Vec<C64> {
    let mut out = data.to_vec();
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = 0.5 * (data[r * n + c] + data[c * n + r].conj());
        }
    }
    out
}
