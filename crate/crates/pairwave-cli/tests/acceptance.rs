//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairwave_cli::output::without_timing;
use pairwave_core::condensate::{solve_hartree, CondensateSolution, HartreeOptions};
use pairwave_core::csym;
use pairwave_core::excitations::{
    build_symplectic, excitation_spectrum, hph_eigenvalues, null_vector_residual, solve_fetter, ExcitationSet,
};
use pairwave_core::focksector::{conjugation_scaling_check, phonon_blocks, theorem2_check, verify_projector_lemmas};
use pairwave_core::linalg::{self, c, CMat, C64};
use pairwave_core::model::{build_model, QuadraticModel};
use pairwave_core::riccati::{
    directional_derivative, energy_functional, energy_gradient, flip_branch, solve_riccati_bdg,
    solve_riccati_greedy, solve_riccati_variational, PairKernel, RiccatiOptions,
};
use pairwave_core::spectral::{build_basis, TrapModel};

const M: usize = 32;
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Setup {
    sol: CondensateSolution,
    qm: QuadraticModel,
    var: PairKernel,
    greedy: PairKernel,
    bdg: PairKernel,
    ex: ExcitationSet,
    solve_secs: f64,
}

fn trap(g: f64) -> TrapModel {
    TrapModel {
        omega: 1.0,
        g,
        sigma: 0.5,
        n: 100,
    }
}

fn opts() -> RiccatiOptions {
    RiccatiOptions {
        seed: SEED,
        ..Default::default()
    }
}

/// Hartree plus the three Riccati solvers at the given coupling.
fn setup(g: f64) -> Setup {
    let t = Instant::now();
    let basis = build_basis(M, 2 * M).unwrap();
    let tm = trap(g);
    let sol = solve_hartree(&tm, &basis, HartreeOptions::default()).unwrap();
    let qm = build_model(&sol, &tm, &basis);
    let var = solve_riccati_variational(&qm, &opts()).unwrap();
    let greedy = solve_riccati_greedy(&qm, M - 1, &opts()).unwrap();
    let fs = solve_fetter(&qm).unwrap();
    let bdg = solve_riccati_bdg(&qm, &fs.amplitudes).unwrap();
    let ex = excitation_spectrum(&qm, &var.k.mat).unwrap();
    Setup {
        sol,
        qm,
        var,
        greedy,
        bdg,
        ex,
        solve_secs: t.elapsed().as_secs_f64(),
    }
}

fn c1_free_anchor() -> Outcome {
    let s = setup(0.0);
    let mut err = (s.sol.mu - 1.0).abs().max((s.sol.e_h - 1.0).abs());
    for pk in [&s.var, &s.greedy, &s.bdg] {
        err = err.max(linalg::spectral_norm(&pk.k.mat));
    }
    for j in 1..=10 {
        err = err.max((s.ex.e[j - 1] - 2.0 * j as f64).abs());
    }
    outcome(
        err < 1e-8 && s.solve_secs < 1.0,
        format!("max error {err:.2e} (tol 1e-8), runtime {:.3} s (limit 1 s)", s.solve_secs),
    )
}

fn c2_residuals(s: &Setup) -> Outcome {
    let mut pass = s.solve_secs < 30.0;
    let mut parts = Vec::new();
    for (name, pk) in [("variational", &s.var), ("greedy", &s.greedy), ("bdg", &s.bdg)] {
        pass &= pk.riccati_residual < 1e-8 && pk.op_norm < 1.0;
        parts.push(format!("{name} residual {:.2e} norm {:.4}", pk.riccati_residual, pk.op_norm));
    }
    outcome(
        pass,
        format!("{} (tol 1e-8, norm < 1), runtime {:.2} s (limit 30 s)", parts.join(", "), s.solve_secs),
    )
}

fn random_sym_perp(qm: &QuadraticModel, rng: &mut ChaCha8Rng, scale: f64) -> CMat {
    let a = CMat::from_fn(M, M, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let p = &qm.proj.mat;
    let k = linalg::symmetric_part(&(p * a * p.transpose()));
    &k * c(scale / csym::op_norm(&k))
}

fn c3_gradient(s: &Setup) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    // A non-stationary admissible point.
    let k = random_sym_perp(&s.qm, &mut rng, 0.4);
    let g = energy_gradient(&k, &s.qm).unwrap();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let ell = random_sym_perp(&s.qm, &mut rng, 1.0);
        let ep = energy_functional(&(&k + &ell * c(step)), &s.qm).unwrap();
        let em = energy_functional(&(&k - &ell * c(step)), &s.qm).unwrap();
        let fd = (ep - em) / (2.0 * step);
        let an = directional_derivative(&g, &ell);
        worst = worst.max((fd - an).abs() / an.abs());
    }
    outcome(worst < 1e-6, format!("max relative error {worst:.2e} over 10 directions (tol 1e-6)"))
}

fn c4_cross_solver(s: &Setup) -> Outcome {
    let dg = linalg::spectral_norm(&(&s.var.k.mat - &s.greedy.k.mat));
    let db = linalg::spectral_norm(&(&s.var.k.mat - &s.bdg.k.mat));
    outcome(
        dg < 1e-6 && db < 1e-6,
        format!("|k_var - k_greedy| {dg:.2e}, |k_var - k_bdg| {db:.2e} (tol 1e-6)"),
    )
}

fn c5_spectral_identities(s: &Setup) -> Outcome {
    let r = &s.ex.residuals;
    let worst = r.completeness.max(r.biorthogonality).max(r.uv.max());
    outcome(
        worst < 1e-8,
        format!(
            "completeness {:.2e}, closed sums {:.2e}, uv relations {:.2e}, biorthogonality {:.2e} (tol 1e-8)",
            r.completeness,
            r.uv.closed_uu.max(r.uv.closed_vv),
            r.uv.max(),
            r.biorthogonality
        ),
    )
}

fn c6_similarity(s: &Setup) -> Outcome {
    let sys = build_symplectic(&s.qm, &s.var.k.mat).unwrap();
    let ev = hph_eigenvalues(&s.qm, &s.var.k.mat);
    let mut want = ev.clone();
    want.extend(ev.iter().map(|z| -z));
    let dist = linalg::multiset_distance(&linalg::eigenvalues(&sys.m_reduced), &want);
    let null = null_vector_residual(&s.qm);
    outcome(
        sys.similarity_residual < 1e-10 && dist < 1e-8 && null < 1e-8,
        format!(
            "|DW - WM| {:.2e} (tol 1e-10), multiset {dist:.2e}, null vector {null:.2e} (tol 1e-8)",
            sys.similarity_residual
        ),
    )
}

fn c7_theorem2(s: &Setup) -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, n) in [(3, 2), (4, 3), (4, 4)] {
        let (e, ft) = phonon_blocks(&s.qm, &s.ex, m).unwrap();
        let r = theorem2_check(m, n, &e, &ft).unwrap();
        pass &= r.max_deviation < 1e-8 && r.max_eigenvector_residual < 1e-8;
        parts.push(format!(
            "({m},{n}) eig {:.2e} vec {:.2e}",
            r.max_deviation, r.max_eigenvector_residual
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        pass && secs < 10.0,
        format!("{} (tol 1e-8), runtime {secs:.2} s (limit 10 s)", parts.join(", ")),
    )
}

fn c8_projectors() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, n) in [(2, 3), (3, 4)] {
        let r = verify_projector_lemmas(m, n).unwrap().max();
        pass &= r < 1e-12;
        parts.push(format!("({m},{n}) {r:.2e}"));
    }
    outcome(pass, format!("{} (tol 1e-12)", parts.join(", ")))
}

fn c9_flip(s: &Setup) -> Outcome {
    let f = flip_branch(&s.var, &[1], &s.qm, 1e-11).unwrap();
    let flipped = hph_eigenvalues(&s.qm, &f.k.mat);
    let mut want: Vec<C64> = s.ex.e.iter().map(|&e| C64::new(e, 0.0)).collect();
    want[0] = -want[0];
    let dist = linalg::multiset_distance(&flipped, &want);
    outcome(
        f.riccati_residual < 1e-8 && f.op_norm > 1.0 && dist < 1e-8,
        format!(
            "residual {:.2e}, norm {:.4} (> 1), spectrum vs E1 -> -E1 {dist:.2e} (tol 1e-8)",
            f.riccati_residual, f.op_norm
        ),
    )
}

fn c10_conjugation(s: &Setup) -> Outcome {
    let r = conjugation_scaling_check(&s.qm, &s.var.k.mat, &s.ex, 3, &[4, 8, 16]).unwrap();
    let devs: Vec<f64> = r.rows.iter().map(|row| row.deviation).collect();
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let in_band = r.ratios.iter().all(|q| (1.3..=3.0).contains(q));
    let fmt = |xs: &[f64], p: usize| xs.iter().map(|x| format!("{x:.p$e}")).collect::<Vec<_>>().join(", ");
    outcome(
        monotone && in_band,
        format!(
            "deviations [{}], ratios [{}] (monotone {monotone}, band [1.3, 3.0])",
            fmt(&devs, 3),
            r.ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn run_binary(dir: &Path) -> serde_json::Value {
    let config = r#"{
  "basis": {"M": 32},
  "model": {"g": 0.01, "N": 100},
  "riccati": {"seed": 7},
  "output": {"directory": "out"}
}
"#;
    std::fs::write(dir.join("config.json"), config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_pairwave"))
        .args(["run", "config.json"])
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(status.status.code().is_some(), "pairwave was killed");
    let text = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn c11_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = without_timing(&run_binary(a.path()));
    let rb = without_timing(&run_binary(b.path()));
    let ta = pairwave_cli::output::to_json_string(&ra);
    let tb = pairwave_cli::output::to_json_string(&rb);
    outcome(
        ta == tb,
        format!("report.json without timing: {} bytes vs {} bytes, identical {}", ta.len(), tb.len(), ta == tb),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut record = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} {name}: {} [{secs:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o, secs));
    };
    record("C1 free anchor", &c1_free_anchor);
    let s = setup(0.01);
    record("C2 riccati residual", &|| c2_residuals(&s));
    record("C3 gradient", &|| c3_gradient(&s));
    record("C4 cross-solver", &|| c4_cross_solver(&s));
    record("C5 spectral identities", &|| c5_spectral_identities(&s));
    record("C6 symplectic similarity", &|| c6_similarity(&s));
    record("C7 fock eigenvalue oracle", &|| c7_theorem2(&s));
    record("C8 projector lemmas", &c8_projectors);
    record("C9 branch flip", &|| c9_flip(&s));
    record("C10 conjugation scaling", &|| c10_conjugation(&s));
    record("C11 determinism", &c11_determinism);
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
