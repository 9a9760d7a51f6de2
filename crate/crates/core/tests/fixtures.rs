use std::path::{Path, PathBuf};

use sfvqd_core::ansatz::reference_state;
use sfvqd_core::hamio::{load, parse, save, validate_physics, HamiltonianRecord, LoadMode, ScanKey};
use sfvqd_core::oracle::{casci_reference, exact_spectrum, labelled_spectrum, sector_labels};
use sfvqd_core::spinops::{number_operators, HalfInt, SpinSector};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixtures() -> Vec<(PathBuf, HamiltonianRecord)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    assert!(paths.len() >= 10);
    paths
        .into_iter()
        .map(|p| {
            let r = load(&p, LoadMode::Strict).unwrap();
            (p, r)
        })
        .collect()
}

fn by_name(name: &str) -> HamiltonianRecord {
    load(fixture_dir().join(name), LoadMode::Strict).unwrap()
}

#[test]
fn every_fixture_passes_physics_validation() {
    for (path, rec) in fixtures() {
        let rep = validate_physics(&rec).unwrap();
        assert!(rep.is_clean(), "{}: {:?}", path.display(), rep.violations);
        for name in ["[H,S_x]", "[H,S^2]", "[H,N_alpha]", "[H,N_beta]"] {
            assert!(
                rep.checks.iter().any(|(c, _)| c == name),
                "{name} not checked; ran {:?}",
                rep.checks
            );
        }
    }
}

#[test]
fn file_names_encode_the_scan_key() {
    for (path, rec) in fixtures() {
        let name = path.file_name().unwrap().to_str().unwrap();
        assert_eq!(rec.file_name(), name);
        assert_eq!(ScanKey::parse_file_name(name).unwrap(), rec.key());
    }
}

#[test]
fn one_norm_bounds_the_spectrum() {
    for (path, rec) in fixtures() {
        let h = rec.hamiltonian().unwrap();
        let spec = exact_spectrum(&h).unwrap();
        let radius = spec.energies.iter().map(|e| e.abs()).fold(0.0, f64::max);
        assert!(h.one_norm() >= radius, "{}", path.display());
        assert_eq!(spec.energies.len(), 1 << rec.n_qubits());
    }
}

#[test]
fn save_then_load_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    for (path, rec) in fixtures() {
        let out = dir.path().join(path.file_name().unwrap());
        save(&rec, &out).unwrap();
        let again = load(&out, LoadMode::Strict).unwrap();
        assert_eq!(again, rec);
        let second = dir.path().join("again.json");
        save(&again, &second).unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&second).unwrap());
    }
}

#[test]
fn unknown_fields_only_pass_leniently() {
    let text = std::fs::read_to_string(fixture_dir().join("lih_bond_+0.00.json")).unwrap();
    let extended = text.replacen('{', "{\n  \"comment\": \"scratch\",", 1);
    let p = Path::new("x.json");
    assert!(parse(&extended, p, LoadMode::Strict).is_err());
    let rec = parse(&extended, p, LoadMode::Lenient).unwrap();
    assert!(rec.extra.contains_key("comment"));
}

#[test]
fn sym_and_antisym_beh2_coincide_at_equilibrium() {
    let a = by_name("beh2_sym-stretch_+0.00.json").hamiltonian().unwrap();
    let b = by_name("beh2_antisym-stretch_+0.00.json").hamiltonian().unwrap();
    let diff = a.add(&b.scaled(-1.0)).unwrap();
    assert!(diff.one_norm() < 1e-8, "{}", diff.one_norm());
}

#[test]
fn beh2_four_electron_block_splits_20_15_1() {
    let rec = by_name("beh2_sym-stretch_+0.00.json");
    let labels = labelled_spectrum(&rec.hamiltonian().unwrap(), rec.n_spatial).unwrap();
    let block: Vec<_> = labels.iter().filter(|l| l.n_alpha == 2 && l.n_beta == 2).collect();
    assert_eq!(block.len(), 36);
    let count = |twice: i32| block.iter().filter(|l| l.spin.twice() == twice).count();
    assert_eq!((count(0), count(2), count(4)), (20, 15, 1));
}

#[test]
fn sector_dimensions_cover_the_register() {
    let rec = by_name("lih_bond_+0.00.json");
    let spec = exact_spectrum(&rec.hamiltonian().unwrap()).unwrap();
    let labels = sector_labels(&spec, rec.n_spatial).unwrap();
    assert_eq!(labels.len(), 64);
    let mut dims = std::collections::BTreeMap::new();
    for l in &labels {
        *dims.entry((l.n_alpha, l.n_beta)).or_insert(0usize) += 1;
    }
    let binom = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
    for ((a, b), d) in &dims {
        assert_eq!(*d, binom(3, *a) * binom(3, *b));
    }
    assert_eq!(dims.values().sum::<usize>(), 64);
}

#[test]
fn lih_singlet_reference_starts_at_the_global_ground_state() {
    let rec = by_name("lih_bond_+0.00.json");
    let h = rec.hamiltonian().unwrap();
    let spec = exact_spectrum(&h).unwrap();
    let labels = labelled_spectrum(&h, rec.n_spatial).unwrap();
    let singlet = casci_reference(&labels, &rec.sector().unwrap(), 3);
    assert!(singlet.complete);
    assert!((singlet.energies[0] - spec.energies[0]).abs() < 1e-10);
    assert!((singlet.energies[0] - -7.873974905343249).abs() < 1e-8);
    assert!(singlet.energies.windows(2).all(|w| w[0] <= w[1]));
    assert!(casci_reference(&labels, &rec.sector().unwrap(), 0).energies.is_empty());
}

#[test]
fn impossible_quintet_on_lih_is_rejected() {
    assert!(SpinSector::for_target_spin(2, HalfInt::integer(2)).is_err());
}

#[test]
fn reference_states_carry_the_declared_sector() {
    for (_, rec) in fixtures() {
        let sector = rec.sector().unwrap();
        let psi = reference_state(rec.n_spatial, &sector).unwrap();
        let (na, nb) = number_operators(rec.n_spatial).unwrap();
        assert!((na.expectation(&psi).unwrap() - rec.n_alpha as f64).abs() < 1e-12);
        assert!((nb.expectation(&psi).unwrap() - rec.n_beta as f64).abs() < 1e-12);
    }
}

#[test]
fn eigenvectors_are_rayleigh_consistent() {
    let rec = by_name("lih_bond_+0.50.json");
    let h = rec.hamiltonian().unwrap();
    for l in labelled_spectrum(&h, rec.n_spatial).unwrap() {
        let hv = h.apply(&l.vector).unwrap();
        let residual: f64 = hv
            .amplitudes()
            .iter()
            .zip(l.vector.amplitudes())
            .map(|(a, v)| (a - v * l.energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(residual < 1e-8);
        assert!((h.expectation(&l.vector).unwrap() - l.energy).abs() < 1e-9);
    }
}
