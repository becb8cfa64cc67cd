use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use qbands::backend::{dense_unitary, Simulator};
use qbands::circuit::*;
use qbands::linalg::DenseMatrix;
use qbands::pauli::{map_hamiltonian, matrix_of, PauliSum};
use qbands::tightbinding::polonium;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Kronecker-product oracle, independent of the simulator kernels.
type M = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn eye(n: usize) -> M {
    (0..n).map(|i| (0..n).map(|j| c((i == j) as u8 as f64, 0.0)).collect()).collect()
}

fn kron(a: &M, b: &M) -> M {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); na * nb]; na * nb];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn mul(a: &M, b: &M) -> M {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn embed(u: &M, q: usize, n: usize) -> M {
    let id = eye(2);
    let mut out = vec![vec![c(1.0, 0.0)]];
    for i in 0..n {
        out = kron(&out, if i == q { u } else { &id });
    }
    out
}

fn cnot_oracle(control: usize, target: usize, n: usize) -> M {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let a = embed(&p0, control, n);
    let b = mul(&embed(&p1, control, n), &embed(&x, target, n));
    a.iter()
        .zip(&b)
        .map(|(r, s)| r.iter().zip(s).map(|(u, v)| u + v).collect())
        .collect()
}

fn ry(a: f64) -> M {
    let (co, si) = ((a / 2.0).cos(), (a / 2.0).sin());
    vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]]
}

fn rz(a: f64) -> M {
    vec![
        vec![C::from_polar(1.0, -a / 2.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), C::from_polar(1.0, a / 2.0)],
    ]
}

fn to_dense(m: &M) -> DenseMatrix {
    let n = m.len();
    DenseMatrix {
        dim: n,
        data: m.iter().flatten().copied().collect(),
    }
}

fn gard(theta: f64, phi: f64) -> DenseMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let (co, si) = (theta.cos(), theta.sin());
    to_dense(&vec![
        vec![one, z, z, z],
        vec![z, c(co, 0.0), C::from_polar(si, phi), z],
        vec![z, C::from_polar(si, -phi), c(-co, 0.0), z],
        vec![z, z, z, one],
    ])
}

#[test]
fn a_gate_matches_reference_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let u = dense_unitary(&a_gate(theta, phi)).unwrap();
        let d = u.distance_up_to_phase(&gard(theta, phi));
        assert!(d < 1e-12, "theta={theta} phi={phi} distance={d}");
    }
}

#[test]
fn a_gate_decomposition_matches_kronecker_oracle() {
    // same seven gates composed with explicit Kronecker products
    let (theta, phi) = (0.7, -1.3);
    let n = 2;
    let seq = [
        cnot_oracle(1, 0, n),
        embed(&rz(-(phi + PI)), 1, n),
        embed(&ry(-(theta + PI / 2.0)), 1, n),
        cnot_oracle(0, 1, n),
        embed(&ry(theta + PI / 2.0), 1, n),
        embed(&rz(phi + PI), 1, n),
        cnot_oracle(1, 0, n),
    ];
    let mut u = eye(4);
    for g in &seq {
        u = mul(g, &u);
    }
    let sim = dense_unitary(&a_gate(theta, phi)).unwrap();
    assert!(sim.sub(&to_dense(&u)).op_norm() < 1e-12);
}

#[test]
fn random_circuits_match_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 3;
    for _ in 0..20 {
        let mut circ = Circuit::new(n);
        let mut u = eye(1 << n);
        for _ in 0..25 {
            let q = rng.gen_range(0..n);
            let a = rng.gen_range(-PI..PI);
            let g = match rng.gen_range(0..3) {
                0 => {
                    circ.ry(q, a);
                    embed(&ry(a), q, n)
                }
                1 => {
                    circ.rz(q, a);
                    embed(&rz(a), q, n)
                }
                _ => {
                    let t = (q + rng.gen_range(1..n)) % n;
                    circ.cnot(q, t);
                    cnot_oracle(q, t, n)
                }
            };
            u = mul(&g, &u);
        }
        let s = Simulator::default().run_statevector(&circ).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            assert!((a - u[i][0]).norm() < 1e-10);
        }
        assert!(dense_unitary(&circ).unwrap().sub(&to_dense(&u)).op_norm() < 1e-10);
    }
}

#[test]
fn controlled_x_is_cnot() {
    let mut x = Circuit::new(1);
    x.x(0);
    let u = dense_unitary(&controlled(&x)).unwrap();
    assert!(u.sub(&to_dense(&cnot_oracle(0, 1, 2))).op_norm() < 1e-14);
}

#[test]
fn controlled_circuit_block_structure() {
    let mut circ = Circuit::new(2);
    circ.h(0).cnot(0, 1).rz(1, 0.4).global_phase(0.3);
    let u = dense_unitary(&circ).unwrap();
    let cu = dense_unitary(&controlled(&circ)).unwrap();
    for r in 0..8 {
        for col in 0..8 {
            let expected = match (r < 4, col < 4) {
                (true, true) => c((r == col) as u8 as f64, 0.0),
                (false, false) => u.get(r - 4, col - 4),
                _ => c(0.0, 0.0),
            };
            assert!((cu.get(r, col) - expected).norm() < 1e-12);
        }
    }
}

fn trotter_error(h: &PauliSum, tau: f64, slices: usize) -> f64 {
    let exact = DenseMatrix::exp_i_hermitian(&matrix_of(h).unwrap(), tau);
    let u = dense_unitary(&trotter_evolution(h, tau, slices).unwrap()).unwrap();
    u.sub(&exact).op_norm()
}

#[test]
fn trotter_error_falls_as_one_over_slices() {
    let model = polonium();
    let h = map_hamiltonian(&model.bloch_matrix([0.3, 0.7, -0.2]).unwrap()).unwrap();
    let tau = 0.1;
    let e4 = trotter_error(&h, tau, 4);
    let e8 = trotter_error(&h, tau, 8);
    let e16 = trotter_error(&h, tau, 16);
    assert!(e4 > 1e-6);
    for (a, b) in [(e4, e8), (e8, e16)] {
        let ratio = a / b;
        assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn commuting_terms_are_exact_in_one_slice() {
    let h = PauliSum::from_terms(2, [(0.4, "ZI".parse().unwrap()), (-1.1, "ZZ".parse().unwrap()), (0.3, "II".parse().unwrap())]).unwrap();
    assert!(trotter_error(&h, 1.7, 1) < 1e-12);
}

fn ansatz_state(params: &[f64]) -> Vec<C> {
    let m = params.len() / 2 + 1;
    let spec = AnsatzSpec::new(m, params.to_vec()).unwrap();
    Simulator::default()
        .run_statevector(&build_ansatz(&spec))
        .unwrap()
        .amplitudes()
        .to_vec()
}

proptest! {
    #[test]
    fn ansatz_stays_in_single_excitation_sector(params in prop::collection::vec(-7.0f64..7.0, 2..10)) {
        let params = if params.len() % 2 == 1 { &params[1..] } else { &params[..] };
        let amps = ansatz_state(params);
        let m = params.len() / 2 + 1;
        let leak: f64 = amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i.count_ones() != 1)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        prop_assert!(leak < 1e-12);
        prop_assert_eq!(amps.len(), 1 << m);
    }

    #[test]
    fn ansatz_amplitude_closed_form(params in prop::collection::vec(-7.0f64..7.0, 6)) {
        // qubit j excited <-> basis index 1 << (M-1-j)
        let amps = ansatz_state(&params);
        let m = 4;
        let mut sin_prod = 1.0;
        let mut phase = 0.0;
        let mut expected = Vec::new();
        expected.push(c(-params[0].cos(), 0.0));
        for j in 1..m {
            sin_prod *= params[2 * (j - 1)].sin();
            phase += params[2 * (j - 1) + 1];
            let v = if j + 1 < m { -sin_prod * params[2 * j].cos() } else { sin_prod };
            expected.push(C::from_polar(1.0, phase) * v);
        }
        let got: Vec<C> = (0..m).map(|j| amps[1 << (m - 1 - j)]).collect();
        let overlap: C = got.iter().zip(&expected).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((overlap.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn from_amplitudes_round_trip(re in prop::collection::vec(-1.0f64..1.0, 4), im in prop::collection::vec(-1.0f64..1.0, 4)) {
        let target: Vec<C> = re.iter().zip(&im).map(|(a, b)| c(*a, *b)).collect();
        let norm = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let spec = AnsatzSpec::from_amplitudes(&target).unwrap();
        let amps = Simulator::default().run_statevector(&build_ansatz(&spec)).unwrap();
        let got: Vec<C> = (0..4).map(|j| amps.amplitudes()[1 << (3 - j)]).collect();
        let overlap: C = got.iter().zip(&target).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((overlap.norm() / norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn circuit_times_adjoint_is_identity(params in prop::collection::vec(-7.0f64..7.0, 4)) {
        let spec = AnsatzSpec::new(3, params).unwrap();
        let circ = build_ansatz(&spec);
        let u = dense_unitary(&circ.then(&adjoint(&circ)).unwrap()).unwrap();
        prop_assert!(u.sub(&DenseMatrix::identity(8)).op_norm() < 1e-10);
    }

    #[test]
    fn word_exponential_matches_dense(word in "[IXYZ]{3}", angle in -3.0f64..3.0) {
        let w = word.parse().unwrap();
        let h = PauliSum::from_terms(3, [(1.0, w)]).unwrap();
        prop_assert!(trotter_error(&h, angle, 1) < 1e-12);
    }

    #[test]
    fn norm_preserved_by_every_gate(params in prop::collection::vec(-7.0f64..7.0, 6)) {
        let spec = AnsatzSpec::new(4, params).unwrap();
        let mut s = qbands::backend::StateVector::zero(4);
        for g in build_ansatz(&spec).gates() {
            s.apply_gate(g);
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }
}
