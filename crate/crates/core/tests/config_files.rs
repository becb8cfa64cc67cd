use std::path::PathBuf;

use qbands::backend::Tier;
use qbands::config::{ModelFile, RunFile};
use qbands::tightbinding::{polonium, simple_cubic_xmg, KPath, POLONIUM_LATTICE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn bundled_model_file_matches_builtin() {
    let from_file = ModelFile::load(&configs().join("polonium.toml")).unwrap().build().unwrap();
    let builtin = polonium();
    assert_eq!(from_file.n_orbitals(), 4);
    assert_eq!(from_file.hoppings(), builtin.hoppings());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let k: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let a = from_file.bloch_matrix(k).unwrap();
        let b = builtin.bloch_matrix(k).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((a.get(r, c) - b.get(r, c)).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn bundled_run_file_resolves() {
    let run = RunFile::load(&configs().join("polonium_run.toml")).unwrap();
    assert_eq!(run.tier, Tier::Statevector);
    assert_eq!(run.trials, 8);
    assert_eq!(run.shots, 8096);
    let model = ModelFile::load(run.model.as_ref().unwrap()).unwrap().build().unwrap();
    let path = run.kpath.resolve(&model).unwrap();
    let expected = KPath::with_interior_points(simple_cubic_xmg(POLONIUM_LATTICE), 5).unwrap();
    assert_eq!(path.len(), 13);
    for (p, q) in path.points().iter().zip(expected.points()) {
        for i in 0..3 {
            assert!((p.k[i] - q.k[i]).abs() < 1e-12);
        }
        assert_eq!(p.label, q.label);
    }
    run.backend().unwrap();
}
