//! Stage orchestration and report assembly.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use pairwave_core::condensate::{solve_hartree, CondensateSolution, HartreeOptions};
use pairwave_core::csym;
use pairwave_core::error::Error;
use pairwave_core::excitations::{
    build_symplectic, excitation_spectrum, hph_eigenvalues, null_vector_residual, solve_fetter, ExcitationSet,
};
use pairwave_core::focksector::{
    bogoliubov_gap_check, conjugation_scaling_check, construct_eigenvector, depletion_diagnostic, phonon_blocks,
    theorem2_check, verify_projector_lemmas, FockSector,
};
use pairwave_core::linalg::{self, C64};
use pairwave_core::model::{build_model, check_gap_condition, depletion_bound_report, QuadraticModel};
use pairwave_core::riccati::{
    flip_branch, lagrange_multiplier_alt, projected_residual, solve_riccati_bdg, solve_riccati_greedy,
    solve_riccati_variational, PairKernel, RiccatiOptions,
};
use pairwave_core::spectral::{build_basis, TrapModel};

use crate::config::{Format, RunConfig, SolverChoice};
use crate::output::{
    self, cache_dir, float, read_cached, to_json_string, write_csv, write_file, CachedStage, CondensateFile, KernelFile,
};
use crate::CliError;

pub const RICCATI_TOL: f64 = 1e-8;
pub const CROSS_SOLVER_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-8;
pub const SIMILARITY_TOL: f64 = 1e-10;
pub const PROJECTOR_TOL: f64 = 1e-12;
pub const CCR_TOL: f64 = 1e-10;
pub const BOGOLIUBOV_REL_TOL: f64 = 0.05;
pub const GAP_ITERS: usize = 200;

/// Check statuses of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

/// Report under construction. Sections and checks are ordered maps, so output is deterministic.
#[derive(Debug, Clone)]
pub struct Report {
    command: String,
    config: Value,
    sections: BTreeMap<String, Value>,
    checks: BTreeMap<String, Status>,
    timing: BTreeMap<String, f64>,
    error: Option<Value>,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            sections: BTreeMap::new(),
            checks: BTreeMap::new(),
            timing: BTreeMap::new(),
            error: None,
        }
    }

    fn section(&mut self, name: &str, v: Value) {
        self.sections.insert(name.to_string(), v);
    }

    fn check(&mut self, name: &str, s: Status) {
        self.checks.insert(name.to_string(), s);
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t = Instant::now();
        let out = f(self);
        self.timing.insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.values().all(|&s| s != Status::Fail)
    }

    pub fn to_value(&self) -> Value {
        let mut top = serde_json::Map::new();
        top.insert("command".into(), json!(self.command));
        top.insert("config".into(), self.config.clone());
        top.insert("status".into(), json!(if self.passed() { "pass" } else { "fail" }));
        let checks: serde_json::Map<String, Value> =
            self.checks.iter().map(|(k, s)| (k.clone(), json!(s.name()))).collect();
        top.insert("checks".into(), Value::Object(checks));
        for (k, v) in &self.sections {
            top.insert(k.clone(), v.clone());
        }
        if let Some(e) = &self.error {
            top.insert("error".into(), e.clone());
        }
        top.insert("timing".into(), json!(self.timing));
        Value::Object(top)
    }

    pub fn write(&self, cfg: &RunConfig) -> Result<(), CliError> {
        if cfg.wants(Format::Json) {
            write_file(&cfg.output.directory.join("report.json"), &to_json_string(&self.to_value()))?;
        }
        Ok(())
    }
}

fn solver_err(stage: &'static str, e: pairwave_core::Error) -> CliError {
    CliError::Solver {
        stage,
        message: e.to_string(),
    }
}

fn trap(cfg: &RunConfig) -> TrapModel {
    TrapModel {
        omega: cfg.model.omega,
        g: cfg.model.g,
        sigma: cfg.model.sigma,
        n: cfg.model.n,
    }
}

fn riccati_options(cfg: &RunConfig) -> RiccatiOptions {
    RiccatiOptions {
        tol: cfg.riccati.tol,
        max_iter: cfg.riccati.max_iter,
        restarts: cfg.riccati.restarts,
        seed: cfg.riccati.seed,
        ..Default::default()
    }
}

fn solve_condensate(cfg: &RunConfig) -> Result<CondensateSolution, CliError> {
    let basis = build_basis(cfg.basis.m, cfg.basis.quadrature()).map_err(|e| solver_err("hartree", e))?;
    solve_hartree(&trap(cfg), &basis, HartreeOptions::default()).map_err(|e| solver_err("hartree", e))
}

fn quadratic_model(cfg: &RunConfig, sol: &CondensateSolution) -> Result<QuadraticModel, CliError> {
    let basis = build_basis(cfg.basis.m, cfg.basis.quadrature()).map_err(|e| solver_err("model", e))?;
    Ok(build_model(sol, &trap(cfg), &basis))
}

fn hartree_section(rep: &mut Report, sol: &CondensateSolution) {
    rep.section(
        "condensate",
        json!({
            "mu": sol.mu,
            "E_H": sol.e_h,
            "residual": sol.residual,
            "iterations": sol.iterations,
        }),
    );
    rep.check("condensate", Status::of(sol.residual < 1e-8));
}

/// Solved kernels; the primary one drives the downstream stages.
pub struct RiccatiOutcome {
    pub primary: PairKernel,
    pub all: Vec<PairKernel>,
}

fn riccati_stage(rep: &mut Report, cfg: &RunConfig, qm: &QuadraticModel) -> Result<RiccatiOutcome, CliError> {
    match check_gap_condition(qm, cfg.riccati.restarts, GAP_ITERS, cfg.riccati.seed) {
        Ok(gap) => {
            let d = depletion_bound_report(qm, &gap);
            rep.section(
                "gap",
                json!({
                    "c_estimate": gap.c_estimate,
                    "certificate": gap.certificate,
                    "f_hs_over_N": d.f_hs_over_n,
                    "f_perp_over_c": d.f_perp_over_c,
                }),
            );
            rep.check("gap_condition", Status::Pass);
        }
        Err(e) => {
            rep.section("gap", json!({ "error": e.to_string() }));
            rep.check("gap_condition", Status::Fail);
        }
    }
    let opts = riccati_options(cfg);
    let which: Vec<SolverChoice> = match cfg.riccati.solver {
        SolverChoice::All => vec![SolverChoice::Variational, SolverChoice::Greedy, SolverChoice::Bdg],
        s => vec![s],
    };
    let mut all = Vec::new();
    for s in which {
        let pk = match s {
            SolverChoice::Variational => solve_riccati_variational(qm, &opts),
            SolverChoice::Greedy => solve_riccati_greedy(qm, qm.dim() - 1, &opts),
            SolverChoice::Bdg => solve_fetter(qm).and_then(|fs| solve_riccati_bdg(qm, &fs.amplitudes)),
            SolverChoice::All => unreachable!("expanded above"),
        };
        match pk {
            Ok(pk) => all.push(pk),
            Err(e) => {
                record_solvers(rep, qm, &all);
                return Err(solver_err("riccati", e));
            }
        }
    }
    record_solvers(rep, qm, &all);
    let primary = all[0].clone();
    Ok(RiccatiOutcome { primary, all })
}

fn record_solvers(rep: &mut Report, qm: &QuadraticModel, all: &[PairKernel]) {
    let mut solvers = serde_json::Map::new();
    for pk in all {
        let name = pk.solver_tag.name();
        let alt = lagrange_multiplier_alt(&pk.k.mat, qm);
        solvers.insert(
            name.into(),
            json!({
                "riccati_residual": pk.riccati_residual,
                "projected_residual": projected_residual(&pk.k.mat, qm),
                "multiplier_form_difference": (&alt - &pk.lambda).norm(),
                "op_norm": pk.op_norm,
                "hs_norm": csym::hs_norm(&pk.k.mat),
                "energy": pk.energy,
                "iterations": pk.iterations,
                "takagi_abs_z": pk.takagi.modes.iter().take(8).map(|(_, z)| z.norm()).collect::<Vec<_>>(),
            }),
        );
        rep.check(
            &format!("riccati_{name}"),
            Status::of(pk.riccati_residual < RICCATI_TOL && pk.op_norm < 1.0),
        );
    }
    let mut distances = serde_json::Map::new();
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let d = linalg::spectral_norm(&(&a.k.mat - &b.k.mat));
            distances.insert(format!("{}-{}", a.solver_tag.name(), b.solver_tag.name()), json!(d));
        }
    }
    if all.len() > 1 {
        let ok = distances.values().all(|v| v.as_f64().is_some_and(|d| d < CROSS_SOLVER_TOL));
        rep.check("cross_solver", Status::of(ok));
    }
    rep.section("riccati", json!({ "solvers": solvers, "distances": distances }));
}

fn spectrum_stage(rep: &mut Report, cfg: &RunConfig, qm: &QuadraticModel, pk: &PairKernel) -> Result<ExcitationSet, CliError> {
    let k = &pk.k.mat;
    let ex = excitation_spectrum(qm, k).map_err(|e| solver_err("spectrum", e))?;
    let r = &ex.residuals;
    let sys = build_symplectic(qm, k).map_err(|e| solver_err("spectrum", e))?;
    let ev = hph_eigenvalues(qm, k);
    let mut want = ev.clone();
    want.extend(ev.iter().map(|z| -z));
    let multiset = linalg::multiset_distance(&linalg::eigenvalues(&sys.m_reduced), &want);
    let null = null_vector_residual(qm);
    let identities = [
        r.completeness,
        r.biorthogonality,
        r.uv.orthogonality_uv,
        r.uv.orthonormality,
        r.uv.completeness,
        r.uv.cross_completeness,
        r.uv.closed_uu,
        r.uv.closed_vv,
    ];
    rep.section(
        "spectrum",
        json!({
            "E": ex.e,
            "identities": {
                "eig_omega": r.eig_omega,
                "eig_u": r.eig_u,
                "kappa_hermiticity": r.kappa_hermiticity,
                "completeness": r.completeness,
                "biorthogonality": r.biorthogonality,
                "uv_orthogonality": r.uv.orthogonality_uv,
                "uv_orthonormality": r.uv.orthonormality,
                "uv_completeness": r.uv.completeness,
                "uv_cross_completeness": r.uv.cross_completeness,
                "closed_uu": r.uv.closed_uu,
                "closed_vv": r.uv.closed_vv,
            },
            "symplectic": {
                "similarity_residual": sys.similarity_residual,
                "inverse_residual": sys.inverse_residual,
                "spectrum_distance": multiset,
                "null_vector_residual": null,
            },
        }),
    );
    rep.check("spectral_identities", Status::of(identities.iter().all(|&x| x < IDENTITY_TOL)));
    rep.check(
        "symplectic_similarity",
        Status::of(sys.similarity_residual < SIMILARITY_TOL && multiset < IDENTITY_TOL && null < IDENTITY_TOL),
    );
    if cfg.wants(Format::Csv) {
        write_csv(
            &cfg.output.directory.join("spectrum.csv"),
            &["j", "E_j"],
            ex.e.iter().enumerate().map(|(j, &e)| vec![(j + 1).to_string(), float(e)]),
        )?;
    }
    if cfg.riccati.flip {
        flip_stage(rep, cfg, qm, pk, &ex);
    } else {
        rep.check("branch_flip", Status::Skipped);
    }
    Ok(ex)
}

fn flip_stage(rep: &mut Report, cfg: &RunConfig, qm: &QuadraticModel, pk: &PairKernel, ex: &ExcitationSet) {
    match flip_branch(pk, &[1], qm, cfg.riccati.tol) {
        Ok(s) => {
            let flipped = hph_eigenvalues(qm, &s.k.mat);
            let mut want: Vec<C64> = ex.e.iter().map(|&e| C64::new(e, 0.0)).collect();
            want[0] = -want[0];
            let dist = linalg::multiset_distance(&flipped, &want);
            rep.section(
                "flip",
                json!({
                    "mode": 1,
                    "riccati_residual": s.riccati_residual,
                    "op_norm": s.op_norm,
                    "spectrum_distance": dist,
                }),
            );
            rep.check(
                "branch_flip",
                Status::of(s.riccati_residual < RICCATI_TOL && s.op_norm > 1.0 && dist < IDENTITY_TOL),
            );
        }
        // Without pairing there is no saddle branch to flip to.
        Err(e @ Error::UnpairedMode { .. }) => {
            rep.section("flip", json!({ "skipped": e.to_string() }));
            rep.check("branch_flip", Status::Skipped);
        }
        Err(e) => {
            rep.section("flip", json!({ "error": e.to_string() }));
            rep.check("branch_flip", Status::Fail);
        }
    }
}

fn fock_stage(rep: &mut Report, cfg: &RunConfig, qm: &QuadraticModel, pk: &PairKernel, ex: &ExcitationSet) -> Result<(), CliError> {
    let f = &cfg.fock;
    let fock_err = |e| solver_err("fock-verify", e);
    let mut sec = serde_json::Map::new();
    if f.theorem2 {
        let (e, ft) = phonon_blocks(qm, ex, f.m).map_err(fock_err)?;
        let r = theorem2_check(f.m, f.n, &e, &ft).map_err(fock_err)?;
        let sector = FockSector::sector_cached(f.m, f.n).map_err(fock_err)?;
        let one = construct_eigenvector(&sector, &e, &ft, &[1]).map_err(fock_err)?;
        sec.insert(
            "theorem2".into(),
            json!({
                "m": r.m,
                "N": r.n,
                "dim": r.dim,
                "max_deviation": r.max_deviation,
                "max_imag": r.max_imag,
                "max_eigenvector_residual": r.max_eigenvector_residual,
                "single_excitation_depletion": depletion_diagnostic(&sector, &one.psi, 1),
            }),
        );
        rep.check("theorem2", Status::of(r.passed(IDENTITY_TOL)));
    } else {
        rep.check("theorem2", Status::Skipped);
    }
    if f.projectors {
        let r = verify_projector_lemmas(f.m, f.n).map_err(fock_err)?;
        sec.insert(
            "projectors".into(),
            json!({
                "m": f.m,
                "N": f.n,
                "resolution": r.resolution,
                "signed_factorization": r.signed_factorization,
                "signed_vs_identity": r.signed_vs_identity,
                "u_products": r.u_products,
                "number_structure": r.number_structure,
                "idempotence": r.idempotence,
            }),
        );
        rep.check("projector_lemmas", Status::of(r.max() < PROJECTOR_TOL));
    } else {
        rep.check("projector_lemmas", Status::Skipped);
    }
    if f.conjugation {
        let r = conjugation_scaling_check(qm, &pk.k.mat, ex, f.m, &f.conjugation_n).map_err(fock_err)?;
        let rows: Vec<Value> = r
            .rows
            .iter()
            .map(|row| {
                json!({
                    "N": row.n,
                    "dim": row.dim,
                    "deviation": row.deviation,
                    "nilpotency": row.nilpotency,
                    "inverse_residual": row.inverse_residual,
                })
            })
            .collect();
        // A vanishing kernel makes the conjugation exact at every N.
        let exact = r.rows.iter().all(|row| row.deviation < 1e-13);
        let decreasing = exact || r.rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
        sec.insert(
            "conjugation".into(),
            json!({ "m": r.m, "levels": r.levels, "rows": rows, "ratios": r.ratios }),
        );
        rep.check(
            "conjugation_scaling",
            Status::of(decreasing && r.rows.iter().all(|row| row.nilpotency == 0.0)),
        );
    } else {
        rep.check("conjugation_scaling", Status::Skipped);
    }
    if f.bogoliubov {
        let r = bogoliubov_gap_check(qm, &pk.k.mat, ex, f.m, f.bogoliubov_cap).map_err(fock_err)?;
        sec.insert(
            "bogoliubov".into(),
            json!({
                "m": r.m,
                "N_cap": r.n_cap,
                "gaps": r.gaps,
                "expected": r.expected,
                "max_deviation": r.max_deviation,
                "lowest_gap_rel_error": r.lowest_gap_rel_error,
                "ccr_residual": r.ccr_residual,
                "ccr_anomalous": r.ccr_anomalous,
            }),
        );
        rep.check(
            "bogoliubov_gap",
            Status::of(r.lowest_gap_rel_error < BOGOLIUBOV_REL_TOL && r.ccr_residual < CCR_TOL && r.ccr_anomalous < CCR_TOL),
        );
    } else {
        rep.check("bogoliubov_gap", Status::Skipped);
    }
    rep.section("fock", Value::Object(sec));
    Ok(())
}

/// Subcommands that run a pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Run,
    Hartree,
    Riccati,
    Spectrum,
    FockVerify,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Run => "run",
            Stage::Hartree => "hartree",
            Stage::Riccati => "riccati",
            Stage::Spectrum => "spectrum",
            Stage::FockVerify => "fock-verify",
        }
    }
}

fn cache_condensate(cfg: &RunConfig, sol: &CondensateSolution) -> Result<(), CliError> {
    let dir = cache_dir(cfg, CachedStage::Hartree);
    write_file(&dir.join("condensate.json"), &to_json_string(&CondensateFile::new(sol)))
}

/// Cache the primary kernel and copy it, with its convergence history, to the output directory.
fn emit_kernel(cfg: &RunConfig, pk: &PairKernel) -> Result<(), CliError> {
    let text = to_json_string(&KernelFile::new(&pk.k.mat, pk.solver_tag.name()));
    let dir = cache_dir(cfg, CachedStage::Riccati);
    write_file(&dir.join("kernel.json"), &text)?;
    if cfg.wants(Format::Json) {
        write_file(&cfg.output.directory.join("kernel.json"), &text)?;
    }
    if cfg.wants(Format::Csv) {
        write_csv(
            &cfg.output.directory.join("convergence.csv"),
            &["iter", "energy", "residual"],
            pk.trace
                .iter()
                .map(|s| vec![s.iter.to_string(), float(s.energy), float(s.residual)]),
        )?;
    }
    Ok(())
}

/// Load the cached kernel and rebuild its diagnostics against the model.
fn load_kernel(cfg: &RunConfig, qm: &QuadraticModel) -> Result<(PairKernel, String), CliError> {
    let kf: KernelFile = read_cached(cfg, CachedStage::Riccati, "kernel.json")?;
    let k = kf.matrix()?;
    if k.nrows() != qm.dim() {
        return Err(CliError::Dependency {
            stage: "riccati",
            detail: format!("cached kernel has M = {}, model has M = {}", k.nrows(), qm.dim()),
        });
    }
    let tag = match kf.solver.as_str() {
        "greedy" => pairwave_core::riccati::SolverTag::Greedy,
        "bdg" => pairwave_core::riccati::SolverTag::Bdg,
        _ => pairwave_core::riccati::SolverTag::Variational,
    };
    let pk = PairKernel::from_kernel(k, tag, qm, 0, Vec::new()).map_err(|e| solver_err("riccati", e))?;
    let path = cache_dir(cfg, CachedStage::Riccati).join("kernel.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((pk, text))
}

fn stage_body(rep: &mut Report, cfg: &RunConfig, stage: Stage) -> Result<(), CliError> {
    let sol = match stage {
        Stage::Run | Stage::Hartree => {
            let sol = rep.time("hartree", |_| solve_condensate(cfg))?;
            hartree_section(rep, &sol);
            cache_condensate(cfg, &sol)?;
            sol
        }
        _ => {
            let cf: CondensateFile = read_cached(cfg, CachedStage::Hartree, "condensate.json")?;
            cf.solution()
        }
    };
    if stage == Stage::Hartree {
        return Ok(());
    }
    let qm = quadratic_model(cfg, &sol)?;
    let pk = match stage {
        Stage::Run | Stage::Riccati => {
            let out = rep.time("riccati", |r| riccati_stage(r, cfg, &qm))?;
            emit_kernel(cfg, &out.primary)?;
            debug_assert!(!out.all.is_empty());
            out.primary
        }
        _ => {
            let (pk, text) = load_kernel(cfg, &qm)?;
            if stage == Stage::Spectrum && cfg.wants(Format::Json) {
                write_file(&cfg.output.directory.join("kernel.json"), &text)?;
            }
            pk
        }
    };
    if stage == Stage::Riccati {
        return Ok(());
    }
    let ex = match stage {
        Stage::Run | Stage::Spectrum => rep.time("spectrum", |r| spectrum_stage(r, cfg, &qm, &pk))?,
        _ => excitation_spectrum(&qm, &pk.k.mat).map_err(|e| solver_err("spectrum", e))?,
    };
    if stage == Stage::Spectrum {
        return Ok(());
    }
    rep.time("fock", |r| fock_stage(r, cfg, &qm, &pk, &ex))
}

/// Run a stage, write report.json, and return it. Solver failures still leave a partial report.
pub fn execute(cfg: &RunConfig, stage: Stage) -> Result<Report, CliError> {
    let mut rep = Report::new(stage.name(), cfg);
    let t = Instant::now();
    let res = stage_body(&mut rep, cfg, stage);
    rep.timing.insert("total".into(), t.elapsed().as_secs_f64());
    match res {
        Ok(()) => {
            rep.write(cfg)?;
            Ok(rep)
        }
        Err(e @ CliError::Solver { .. }) => {
            rep.error = Some(json!({ "kind": "solver", "message": e.to_string() }));
            rep.write(cfg)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    G,
    N,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "g" => Ok(SweepParam::G),
            "N" => Ok(SweepParam::N),
            _ => Err(CliError::Config(format!("sweep parameter must be g or N, got {s:?}"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SweepParam::G => "g",
            SweepParam::N => "N",
        }
    }
}

/// Parse `start:stop:count` into `count` equally spaced values including both ends.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("grid must be start:stop:count, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn sweep_point(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let sol = solve_condensate(cfg)?;
    let qm = quadratic_model(cfg, &sol)?;
    // Outside the gap regime no admissible kernel exists; fail before the solvers try.
    check_gap_condition(&qm, cfg.riccati.restarts, GAP_ITERS, cfg.riccati.seed).map_err(|e| solver_err("gap", e))?;
    let opts = riccati_options(cfg);
    let pk = match cfg.riccati.solver {
        SolverChoice::Greedy => solve_riccati_greedy(&qm, qm.dim() - 1, &opts),
        SolverChoice::Bdg => solve_fetter(&qm).and_then(|fs| solve_riccati_bdg(&qm, &fs.amplitudes)),
        SolverChoice::Variational | SolverChoice::All => solve_riccati_variational(&qm, &opts),
    }
    .map_err(|e| solver_err("riccati", e))?;
    Ok(excitation_spectrum(&qm, &pk.k.mat).map_err(|e| solver_err("spectrum", e))?.e)
}

/// Vary one scalar over a grid; writes `sweep_<param>.csv` in long format (param, j, E_j).
pub fn sweep(cfg: &RunConfig, param: SweepParam, grid: &[f64]) -> Result<std::path::PathBuf, CliError> {
    let configs: Vec<RunConfig> = grid
        .iter()
        .map(|&x| {
            let mut c = cfg.clone();
            match param {
                SweepParam::G => c.model.g = x,
                SweepParam::N => {
                    if x < 1.0 || x.fract() != 0.0 {
                        return Err(CliError::Config(format!("N grid values must be positive integers, got {x}")));
                    }
                    c.model.n = x as usize;
                }
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_, _>>()?;
    let spectra: Vec<Result<Vec<f64>, CliError>> = configs.par_iter().map(sweep_point).collect();
    let mut rows = Vec::new();
    for (&x, spec) in grid.iter().zip(spectra) {
        let e = spec.map_err(|e| match e {
            CliError::Solver { stage, message } => CliError::Solver {
                stage,
                message: format!("{message} (at {} = {x})", param.name()),
            },
            other => other,
        })?;
        let label = match param {
            SweepParam::G => float(x),
            SweepParam::N => (x as usize).to_string(),
        };
        for (j, v) in e.iter().enumerate() {
            rows.push(vec![label.clone(), (j + 1).to_string(), float(*v)]);
        }
    }
    let path = cfg.output.directory.join(format!("sweep_{}.csv", param.name()));
    write_csv(&path, &[param.name(), "j", "E_j"], rows)?;
    Ok(path)
}

pub use output::without_timing;
