use num_complex::Complex64 as C;
use proptest::prelude::*;
use qbands::backend::{expval_exact, StateVector};
use qbands::linalg::HermitianMatrix;
use qbands::pauli::*;
use qbands::tightbinding::polonium;

fn hermitian(m: usize, re: &[f64], im: &[f64], real_only: bool) -> HermitianMatrix {
    HermitianMatrix::from_fn(m, |r, c| {
        let (a, b) = (r.min(c), r.max(c));
        let i = a * m + b;
        if r == c {
            C::new(re[i], 0.0)
        } else {
            let z = C::new(re[i], if real_only { 0.0 } else { im[i] });
            if r < c {
                z
            } else {
                z.conj()
            }
        }
    })
    .unwrap()
}

fn matrix_strategy(real_only: bool) -> impl Strategy<Value = HermitianMatrix> {
    (1usize..=5).prop_flat_map(move |m| {
        (
            prop::collection::vec(-5.0f64..5.0, m * m),
            prop::collection::vec(-5.0f64..5.0, m * m),
        )
            .prop_map(move |(re, im)| hermitian(m, &re, &im, real_only))
    })
}

/// Rows and columns of the single-excitation states, orbital order.
fn weight_one_block(big: &HermitianMatrix, m: usize) -> Vec<Vec<C>> {
    let idx: Vec<usize> = (0..m).map(|a| single_excitation_index(m, a)).collect();
    idx.iter().map(|&r| idx.iter().map(|&c| big.get(r, c)).collect()).collect()
}

/// Smallest number of qubit-wise commuting groups, by exhaustive search.
fn min_partition(words: &[PauliWord]) -> usize {
    fn go(words: &[PauliWord], i: usize, groups: &mut Vec<Vec<usize>>, best: &mut usize) {
        if groups.len() >= *best {
            return;
        }
        if i == words.len() {
            *best = groups.len();
            return;
        }
        for g in 0..groups.len() {
            if groups[g].iter().all(|&j| words[j].qubitwise_commutes(&words[i])) {
                groups[g].push(i);
                go(words, i + 1, groups, best);
                groups[g].pop();
            }
        }
        groups.push(vec![i]);
        go(words, i + 1, groups, best);
        groups.pop();
    }
    let mut best = words.len();
    go(words, 0, &mut Vec::new(), &mut best);
    best
}

#[test]
fn real_bloch_part_groups() {
    let h = polonium().bloch_matrix([0.3, 0.1, 0.0]).unwrap();
    // the s-p entries are purely imaginary off the high-symmetry points and
    // p-p hops stay on their own axis, so the real part is diagonal
    let real = HermitianMatrix::from_fn(4, |r, c| C::new(h.get(r, c).re, 0.0)).unwrap();
    assert_eq!(partition(&map_hamiltonian(&real).unwrap()).len(), 1);
    // fill in real s-p couplings and the full three-group structure appears
    let dense = HermitianMatrix::from_fn(4, |r, c| C::new(h.get(r, c).re + if r != c { 0.5 + (r * c) as f64 } else { 0.0 }, 0.0)).unwrap();
    assert_eq!(partition(&map_hamiltonian(&dense).unwrap()).len(), 3);
}

#[test]
fn imaginary_offdiagonals_group_count() {
    let m = 4;
    let h = HermitianMatrix::from_fn(m, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Equal => C::new(r as f64, 0.0),
        std::cmp::Ordering::Less => C::new(0.0, 1.0 + (r + c) as f64),
        std::cmp::Ordering::Greater => C::new(0.0, -(1.0 + (r + c) as f64)),
    })
    .unwrap();
    let sum = map_hamiltonian(&h).unwrap();
    let greedy = partition(&sum).len();
    let words: Vec<PauliWord> = sum.terms().iter().map(|(_, w)| w.clone()).collect();
    let optimal = min_partition(&words);
    assert!(greedy <= 2 * m - 1, "greedy {greedy}");
    assert!(optimal <= greedy);
}

#[test]
fn omega0_on_superposition() {
    let s = 0.5f64.sqrt();
    let psi = StateVector::from_amplitudes(vec![C::new(s, 0.0), C::new(0.0, 0.0), C::new(s, 0.0), C::new(0.0, 0.0)]).unwrap();
    assert!((expval_exact(&psi, &omega0(2)) - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_excitation_block_round_trip(h in matrix_strategy(false)) {
        let m = h.dim();
        let sum = map_hamiltonian(&h).unwrap();
        prop_assert!(sum.len() <= 1 + m + 2 * m * (m - 1));
        let block = weight_one_block(&matrix_of(&sum).unwrap(), m);
        for r in 0..m {
            for c in 0..m {
                prop_assert!((block[r][c] - h.get(r, c)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn real_images_take_three_groups(h in matrix_strategy(true)) {
        let sum = map_hamiltonian(&h).unwrap();
        let p = partition(&sum);
        prop_assert!(p.len() <= 3);
        if h.dim() >= 2 && (0..h.dim()).any(|r| (0..h.dim()).any(|c| r != c && h.get(r, c).re.abs() > 1e-14)) {
            prop_assert_eq!(p.len(), 3);
        }
    }

    #[test]
    fn groups_commute_and_cover(h in matrix_strategy(false)) {
        let sum = map_hamiltonian(&h).unwrap();
        let p = partition(&sum);
        let mut seen = vec![0usize; sum.len()];
        for g in &p.groups {
            for (i, &a) in g.iter().enumerate() {
                seen[a] += 1;
                for &b in &g[..i] {
                    prop_assert!(sum.terms()[a].1.qubitwise_commutes(&sum.terms()[b].1));
                }
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        prop_assert!(p.len() <= 2 * h.dim() + 1);
    }

    #[test]
    fn omega0_is_zero_state_probability(n in 1usize..=4, amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)) {
        let dim = 1 << n;
        let raw: Vec<C> = amps[..dim].iter().map(|&(a, b)| C::new(a, b)).collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let psi = StateVector::from_amplitudes(raw.iter().map(|z| z / norm).collect()).unwrap();
        let p0 = psi.amplitudes()[0].norm_sqr();
        prop_assert!((expval_exact(&psi, &omega0(n)) - p0).abs() < 1e-12);
    }
}
