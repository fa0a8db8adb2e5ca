//! End-to-end pipeline at N = 100, N·g = 1, σ = 0.5, M = 32.

use std::sync::OnceLock;

use pairwave_core::condensate::{solve_hartree, HartreeOptions};
use pairwave_core::csym;
use pairwave_core::excitations::{
    build_symplectic, excitation_spectrum, hph_eigenvalues, null_vector_residual, solve_fetter, ExcitationSet,
};
use pairwave_core::focksector::{phonon_blocks, theorem2_check, verify_projector_lemmas};
use pairwave_core::linalg::{self, C64};
use pairwave_core::model::{build_model, check_gap_condition, QuadraticModel};
use pairwave_core::riccati::{
    flip_branch, solve_riccati_bdg, solve_riccati_greedy, solve_riccati_variational, PairKernel, RiccatiOptions,
};
use pairwave_core::spectral::{build_basis, TrapModel};

struct Fixture {
    qm: QuadraticModel,
    var: PairKernel,
    ex: ExcitationSet,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let basis = build_basis(32, 64).unwrap();
        let tm = TrapModel {
            omega: 1.0,
            g: 0.01,
            sigma: 0.5,
            n: 100,
        };
        let sol = solve_hartree(&tm, &basis, HartreeOptions::default()).unwrap();
        let qm = build_model(&sol, &tm, &basis);
        let opts = RiccatiOptions {
            seed: 7,
            ..Default::default()
        };
        let var = solve_riccati_variational(&qm, &opts).unwrap();
        let ex = excitation_spectrum(&qm, &var.k.mat).unwrap();
        Fixture { qm, var, ex }
    })
}

#[test]
fn gap_condition_holds() {
    let f = fixture();
    let gap = check_gap_condition(&f.qm, 16, 200, 3).unwrap();
    assert!(gap.c_estimate > 0.0);
    assert!(gap.certificate <= gap.c_estimate + 1e-12);
}

#[test]
fn three_solvers_agree() {
    let f = fixture();
    let opts = RiccatiOptions {
        seed: 7,
        ..Default::default()
    };
    assert!(f.var.riccati_residual < 1e-8 && f.var.op_norm < 1.0);
    let gr = solve_riccati_greedy(&f.qm, 31, &opts).unwrap();
    let fs = solve_fetter(&f.qm).unwrap();
    let bdg = solve_riccati_bdg(&f.qm, &fs.amplitudes).unwrap();
    for pk in [&gr, &bdg] {
        assert!(pk.riccati_residual < 1e-8, "{:?} {}", pk.solver_tag, pk.riccati_residual);
        assert!(pk.op_norm < 1.0);
        assert!(linalg::spectral_norm(&(&pk.k.mat - &f.var.k.mat)) < 1e-6);
    }
}

#[test]
fn spectrum_and_similarity() {
    let f = fixture();
    let r = &f.ex.residuals;
    assert!(r.completeness < 1e-8 && r.biorthogonality < 1e-8 && r.uv.max() < 1e-8, "{r:?}");
    assert!(f.ex.e.windows(2).all(|w| w[0] <= w[1]));
    let sys = build_symplectic(&f.qm, &f.var.k.mat).unwrap();
    assert!(sys.similarity_residual < 1e-10);
    assert!(null_vector_residual(&f.qm) < 1e-8);
    let ev = hph_eigenvalues(&f.qm, &f.var.k.mat);
    let mut want = ev.clone();
    want.extend(ev.iter().map(|z| -z));
    assert!(linalg::multiset_distance(&linalg::eigenvalues(&sys.m_reduced), &want) < 1e-8);
}

#[test]
fn dipole_mode_sits_at_twice_the_trap_frequency() {
    // Translation invariance of the pair potential decouples the centre of mass.
    let f = fixture();
    assert!((f.ex.e[0] - 2.0).abs() < 1e-8, "{}", f.ex.e[0]);
}

#[test]
fn branch_flip_negates_one_energy() {
    let f = fixture();
    let s = flip_branch(&f.var, &[1], &f.qm, 1e-11).unwrap();
    assert!(s.riccati_residual < 1e-8 && s.op_norm > 1.0);
    let flipped = hph_eigenvalues(&f.qm, &s.k.mat);
    let mut want: Vec<C64> = f.ex.e.iter().map(|&e| C64::new(e, 0.0)).collect();
    want[0] = -want[0];
    assert!(linalg::multiset_distance(&flipped, &want) < 1e-8);
}

#[test]
fn fock_oracles_on_solved_model() {
    let f = fixture();
    for (m, n) in [(3, 2), (4, 3), (4, 4)] {
        let (e, ft) = phonon_blocks(&f.qm, &f.ex, m).unwrap();
        let r = theorem2_check(m, n, &e, &ft).unwrap();
        assert!(r.passed(1e-8), "{r:?}");
    }
    for (m, n) in [(2, 3), (3, 4)] {
        assert!(verify_projector_lemmas(m, n).unwrap().max() < 1e-12);
    }
    assert!(csym::op_norm(&f.var.k.mat) < 1.0);
}
