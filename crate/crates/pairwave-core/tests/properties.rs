//! Invariants over random quadratic models and random Fock data.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairwave_core::csym;
use pairwave_core::excitations::{build_symplectic, excitation_spectrum, hph_eigenvalues, solve_fetter};
use pairwave_core::focksector::{construct_eigenvector, theorem2_check, FockSector};
use pairwave_core::linalg::{self, c, CMat, CVec, C64};
use pairwave_core::model::QuadraticModel;
use pairwave_core::riccati::{
    energy_functional, energy_gradient, solve_riccati_bdg, solve_riccati_variational, RiccatiOptions,
};

/// Random model on C^m with φ = e₀, h_⊥ ≥ 1 and ‖f_⊥‖ ≤ pairing.
fn random_model(m: usize, pairing: f64, seed: u64) -> QuadraticModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rnd = |s: f64| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * s;
    let a = CMat::from_fn(m, m, |_, _| rnd(0.4));
    let mut h = linalg::hermitian_part(&a);
    for i in 1..m {
        h[(i, i)] += c(1.0 + i as f64);
    }
    let b = linalg::symmetric_part(&CMat::from_fn(m, m, |_, _| rnd(1.0)));
    let f = &b * c(pairing / linalg::spectral_norm(&b));
    let mut phi = CVec::zeros(m);
    phi[0] = c(1.0);
    for i in 0..m {
        h[(0, i)] = c(0.0);
        h[(i, 0)] = c(0.0);
    }
    QuadraticModel::from_parts(h, f, CMat::zeros(m, m), phi, 0.0, 0.0, 10.0)
}

fn random_sym(m: usize, scale: f64, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    linalg::symmetric_part(&CMat::from_fn(m, m, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale
    }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn variational_and_bdg_agree(seed in 0u64..1000, m in 3usize..7, pairing in 0.05f64..0.8) {
        let qm = random_model(m, pairing, seed);
        let v = solve_riccati_variational(&qm, &RiccatiOptions { seed, ..Default::default() }).unwrap();
        prop_assert!(v.riccati_residual < 1e-8);
        prop_assert!(v.op_norm < 1.0);
        let fs = solve_fetter(&qm).unwrap();
        let b = solve_riccati_bdg(&qm, &fs.amplitudes).unwrap();
        prop_assert!(linalg::spectral_norm(&(&b.k.mat - &v.k.mat)) < 1e-6);
        let ex = excitation_spectrum(&qm, &v.k.mat).unwrap();
        prop_assert!(ex.e.iter().all(|&e| e > 0.0));
        for (a, b) in ex.e.iter().zip(&fs.e_plus) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn symplectic_spectrum_is_symmetric(seed in 0u64..1000, m in 3usize..7) {
        let qm = random_model(m, 0.5, seed);
        let v = solve_riccati_variational(&qm, &RiccatiOptions::default()).unwrap();
        let sys = build_symplectic(&qm, &v.k.mat).unwrap();
        prop_assert!(sys.similarity_residual < 1e-10);
        let ev = hph_eigenvalues(&qm, &v.k.mat);
        let mut want = ev.clone();
        want.extend(ev.iter().map(|z| -z));
        prop_assert!(linalg::multiset_distance(&linalg::eigenvalues(&sys.m_reduced), &want) < 1e-8);
    }

    #[test]
    fn energy_minimum_beats_random_admissible_kernels(seed in 0u64..1000, m in 3usize..6) {
        let qm = random_model(m, 0.6, seed);
        let v = solve_riccati_variational(&qm, &RiccatiOptions::default()).unwrap();
        let e0 = v.energy.unwrap();
        let p = &qm.proj.mat;
        let k = p * random_sym(m, 1.0, seed ^ 0x5a5a) * p.transpose();
        let k = &k * c(0.9 / csym::op_norm(&k).max(1e-12));
        prop_assert!(energy_functional(&k, &qm).unwrap() >= e0 - 1e-12);
        let g = energy_gradient(&v.k.mat, &qm).unwrap();
        prop_assert!(linalg::frob(&(p * g * p.transpose())) < 1e-7);
    }

    #[test]
    fn theorem2_for_random_blocks(seed in 0u64..1000, m in 2usize..5, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e: Vec<f64> = (0..m - 1).map(|_| 0.5 + 3.0 * rng.random::<f64>()).collect();
        e.sort_by(f64::total_cmp);
        let ft = random_sym(m - 1, 2.0, seed + 1);
        let r = theorem2_check(m, n, &e, &ft).unwrap();
        prop_assert!(r.max_deviation < 1e-8, "{:?}", r);
        prop_assert!(r.max_eigenvector_residual < 1e-8, "{:?}", r);
        let s = FockSector::enumerate_sector(m, n).unwrap();
        let one = construct_eigenvector(&s, &e, &ft, &[1]).unwrap();
        prop_assert!((one.energy - e[0]).abs() < 1e-15);
    }

    #[test]
    fn ladder_ccr_on_interior(m in 1usize..4, cap in 2usize..6) {
        let s = FockSector::capped(m, cap).unwrap();
        prop_assert!(s.ccr_residual(cap - 1) < 1e-12);
    }
}

