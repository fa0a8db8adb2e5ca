//! Pair-excitation kernel: energy functional, gradient and Riccati solvers.
//!
//! Ric(k) = h k + k hᵀ + f + k f̄ k. A kernel k with kᵀ = k and k φ̄ = 0 solves
//! the constrained problem when δ̂ Ric(k) δ̂ᵀ = 0; the remaining components are
//! absorbed by the multiplier term (λφᵀ + φλᵀ)/√2.
//!
//! The greedy and BdG solvers and the branch flip work in coordinates of the
//! φ⊥ basis Q, where k = Q k_r Qᵀ and the constraint holds by construction.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csym::{self, TakagiDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::model::QuadraticModel;
use crate::spectral::{Kernel, Symmetry};

/// Largest operator norm an iterate may reach.
const NORM_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverTag {
    Variational,
    Greedy,
    Bdg,
    /// Critical point obtained by a branch flip.
    Saddle,
}

impl SolverTag {
    pub fn name(self) -> &'static str {
        match self {
            SolverTag::Variational => "variational",
            SolverTag::Greedy => "greedy",
            SolverTag::Bdg => "bdg",
            SolverTag::Saddle => "saddle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiStep {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
}

/// A solved pair kernel with its diagnostics.
#[derive(Debug, Clone)]
pub struct PairKernel {
    pub k: Kernel,
    pub op_norm: f64,
    pub takagi: TakagiDecomposition,
    pub solver_tag: SolverTag,
    pub riccati_residual: f64,
    pub lambda: CVec,
    /// Value of the energy functional; `None` outside the unit ball.
    pub energy: Option<f64>,
    pub iterations: usize,
    pub trace: Vec<RiccatiStep>,
}

impl PairKernel {
    pub fn from_kernel(k: CMat, tag: SolverTag, qm: &QuadraticModel, iterations: usize, trace: Vec<RiccatiStep>) -> Result<Self> {
        let k = linalg::symmetric_part(&k);
        let takagi = csym::takagi(&k, 1e-9)?;
        let lambda = lagrange_multiplier(&k, qm);
        let riccati_residual = riccati_residual(&k, &lambda, qm);
        let op_norm = csym::op_norm(&k);
        let energy = if op_norm < 1.0 { energy_functional(&k, qm).ok() } else { None };
        Ok(Self {
            k: Kernel::new(k, Symmetry::ComplexSymmetric),
            op_norm,
            takagi,
            solver_tag: tag,
            riccati_residual,
            lambda,
            energy,
            iterations,
            trace,
        })
    }

    /// k in coordinates of the φ⊥ basis.
    pub fn reduced(&self, qm: &QuadraticModel) -> CMat {
        to_reduced(&self.k.mat, qm)
    }
}

/// Solver options shared by the three methods.
#[derive(Debug, Clone, Copy)]
pub struct RiccatiOptions {
    /// Gradient step; `None` selects 2/(λ_min + λ_max) of h_⊥.
    pub step: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub ascent_iters: usize,
    pub seed: u64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            step: None,
            tol: 1e-11,
            max_iter: 20_000,
            restarts: 16,
            ascent_iters: 200,
            seed: 0,
        }
    }
}

pub fn to_reduced(k: &CMat, qm: &QuadraticModel) -> CMat {
    let q = &qm.perp_basis;
    q.adjoint() * k * linalg::conj(q)
}

pub fn to_full(k_r: &CMat, qm: &QuadraticModel) -> CMat {
    let q = &qm.perp_basis;
    q * k_r * q.transpose()
}

/// Ric(k) = h k + k hᵀ + f + k f̄ k for arbitrary blocks.
pub fn ric_blocks(h: &CMat, f: &CMat, k: &CMat) -> CMat {
    h * k + k * h.transpose() + f + k * linalg::conj(f) * k
}

pub fn ric(k: &CMat, qm: &QuadraticModel) -> CMat {
    ric_blocks(&qm.h.mat, &qm.f.mat, k)
}

/// ‖δ̂ Ric(k) δ̂ᵀ‖₂.
pub fn projected_residual(k: &CMat, qm: &QuadraticModel) -> f64 {
    let p = &qm.proj.mat;
    linalg::frob(&(p * ric(k, qm) * p.transpose()))
}

fn check_domain(k: &CMat) -> Result<f64> {
    let n = csym::op_norm(k);
    if n >= 1.0 {
        return Err(Error::OutOfDomain { op_norm: n });
    }
    Ok(n)
}

/// E[k̄,k] = tr{(δ − k̄k)⁻¹ (k̄hk + ½k̄f + ½f̄k)}.
pub fn energy_functional(k: &CMat, qm: &QuadraticModel) -> Result<f64> {
    check_domain(k)?;
    let m = k.nrows();
    let kb = linalg::conj(k);
    let h = &qm.h.mat;
    let f = &qm.f.mat;
    let inv = linalg::inverse(&(CMat::identity(m, m) - &kb * k))?;
    let inner = &kb * h * k + (&kb * f + linalg::conj(f) * k) * c(0.5);
    let tr = (inv * inner).trace();
    if tr.im.abs() > 1e-10 * tr.re.abs().max(1.0) {
        return Err(Error::Domain(format!("energy has imaginary part {:e}", tr.im)));
    }
    Ok(tr.re)
}

/// ½ (δ − k k̄)⁻¹ Ric(k) (δ − k̄ k)⁻¹.
pub fn energy_gradient(k: &CMat, qm: &QuadraticModel) -> Result<CMat> {
    check_domain(k)?;
    let m = k.nrows();
    let kb = linalg::conj(k);
    let id = CMat::identity(m, m);
    let left = linalg::inverse(&(&id - k * &kb))?;
    let right = linalg::inverse(&(&id - &kb * k))?;
    Ok(linalg::symmetric_part(&(left * ric(k, qm) * right * c(0.5))))
}

/// Directional derivative of the energy along ℓ given the gradient G: 2 Re Σ ℓ̄ G.
pub fn directional_derivative(grad: &CMat, ell: &CMat) -> f64 {
    2.0 * ell.iter().zip(grad.iter()).map(|(l, g)| (l.conj() * g).re).sum::<f64>()
}

/// λ = √2 {N (k γ̄) φ̄ + f φ̄ − ½ f(φ̄,φ̄) φ}.
pub fn lagrange_multiplier(k: &CMat, qm: &QuadraticModel) -> CVec {
    let phib = linalg::conj_vec(&qm.phi);
    let fphi = &qm.f.mat * &phib;
    let ff = qm.phi.dotc(&fphi);
    let kg = k * linalg::conj(&qm.gamma.mat) * &phib * c(qm.n);
    (kg + fphi - &qm.phi * (ff * 0.5)) * c(SQRT_2)
}

/// The same multiplier written as C₁φ + √2 (k hᵀ + f) φ̄ with C₁ = −⟨φ, √2 (k hᵀ + f) φ̄⟩/2.
pub fn lagrange_multiplier_alt(k: &CMat, qm: &QuadraticModel) -> CVec {
    let phib = linalg::conj_vec(&qm.phi);
    let lp = (k * qm.h.mat.transpose() + &qm.f.mat) * phib * c(SQRT_2);
    let c1 = -qm.phi.dotc(&lp) * 0.5;
    &qm.phi * c1 + lp
}

/// ‖Ric(k) − (λφᵀ + φλᵀ)/√2‖₂.
pub fn riccati_residual(k: &CMat, lambda: &CVec, qm: &QuadraticModel) -> f64 {
    let sym = (lambda * qm.phi.transpose() + &qm.phi * lambda.transpose()) * c(1.0 / SQRT_2);
    linalg::frob(&(ric(k, qm) - sym))
}

/// Roots z± = (−h ± √(h² − |f|²))/f of f z² + 2 h z + f̄ = 0, with |z⁺| < 1 < |z⁻|.
pub fn mode_roots(h_ee: f64, f_ee: C64) -> Result<(C64, C64)> {
    let a = f_ee.norm();
    if h_ee <= a {
        return Err(Error::PerModeGapViolated { h_ee, f_abs: a });
    }
    let s = (h_ee * h_ee - a * a).sqrt();
    // Rationalized form of z⁺ avoids cancellation when |f| ≪ h.
    let zp = -f_ee.conj() / (h_ee + s);
    let zm = if a == 0.0 {
        C64::new(f64::INFINITY, 0.0)
    } else {
        -(h_ee + s) / f_ee
    };
    Ok((zp, zm))
}

/// F(e) = h(ē,e) − √(h²(ē,e) − |f(ē,ē)|²) from the per-mode values.
pub fn mode_gain(h_ee: f64, f_abs: f64) -> f64 {
    let s = (h_ee * h_ee - f_abs * f_abs).max(0.0).sqrt();
    // h − s = |f|²/(h + s) without cancellation.
    f_abs * f_abs / (h_ee + s)
}

/// Per-mode values (e†he, e†fē) for the reduced blocks.
fn mode_values(h: &CMat, f: &CMat, e: &CVec) -> (f64, C64) {
    (e.dotc(&(h * e)).re, e.dotc(&(f * linalg::conj_vec(e))))
}

/// −½ Σ_j F(e_j) over the Takagi modes of k in φ⊥.
pub fn mode_energy_sum(k: &CMat, qm: &QuadraticModel) -> Result<f64> {
    let kr = to_reduced(k, qm);
    let t = csym::takagi(&kr, 1e-9)?;
    let h = qm.h_reduced();
    let f = qm.f_reduced();
    Ok(-0.5
        * t.modes
            .iter()
            .map(|(e, _)| {
                let (hv, cv) = mode_values(&h, &f, e);
                mode_gain(hv, cv.norm())
            })
            .sum::<f64>())
}

fn project_sym(k: &CMat, qm: &QuadraticModel) -> CMat {
    let p = &qm.proj.mat;
    linalg::symmetric_part(&(p * k * p.transpose()))
}

fn clamp(k: CMat) -> CMat {
    let n = csym::op_norm(&k);
    if n > NORM_CAP {
        k * c(NORM_CAP / n)
    } else {
        k
    }
}

fn default_step(qm: &QuadraticModel) -> f64 {
    let (ev, _) = linalg::herm_eig(&qm.h_reduced());
    let lo = ev.first().copied().unwrap_or(1.0);
    let hi = ev.last().copied().unwrap_or(1.0);
    2.0 / (lo + hi).max(1e-12)
}

const NEWTON_HANDOFF: f64 = 1e-4;
const NEWTON_RETRY: usize = 200;

fn newton_finish(k: &CMat, energy: f64, qm: &QuadraticModel, tol: f64) -> Option<(CMat, f64, usize)> {
    let (kr, its, _) = newton_polish(&qm.h_reduced(), &qm.f_reduced(), &to_reduced(k, qm), tol, 30).ok()?;
    let kn = to_full(&kr, qm);
    let en = energy_functional(&kn, qm).ok()?;
    let noise = 1e-12 * energy.abs().max(1.0);
    (en <= energy + noise && projected_residual(&kn, qm) < tol).then_some((kn, en, its))
}

/// Minimize the energy over {kᵀ = k, k φ̄ = 0, ‖k‖_op < 1} by projected gradient descent,
/// finished by Newton once the residual is small.
pub fn solve_riccati_variational(qm: &QuadraticModel, opts: &RiccatiOptions) -> Result<PairKernel> {
    let t0 = opts.step.unwrap_or_else(|| default_step(qm));
    let fp = &qm.f_perp.mat;
    let mut k = clamp(project_sym(&(fp * c(-0.5 / (2.0 * csym::op_norm(fp)).max(1.0))), qm));
    let mut energy = energy_functional(&k, qm)?;
    let mut trace = Vec::new();
    let mut t = t0;
    let mut next_newton = 0;
    for iter in 0..=opts.max_iter {
        let residual = projected_residual(&k, qm);
        trace.push(RiccatiStep { iter, energy, residual });
        if residual < opts.tol {
            return PairKernel::from_kernel(k, SolverTag::Variational, qm, iter, trace);
        }
        if iter == opts.max_iter {
            break;
        }
        // Descent is slow when h_⊥ is badly conditioned; near the minimizer hand
        // over to Newton, kept only if it stays admissible and does not raise the energy.
        if residual < NEWTON_HANDOFF && iter >= next_newton {
            next_newton = iter + NEWTON_RETRY;
            if let Some(done) = newton_finish(&k, energy, qm, opts.tol) {
                let (kn, en, its) = done;
                trace.push(RiccatiStep {
                    iter: iter + its,
                    energy: en,
                    residual: projected_residual(&kn, qm),
                });
                return PairKernel::from_kernel(kn, SolverTag::Variational, qm, iter + its, trace);
            }
        }
        let d = project_sym(&energy_gradient(&k, qm)?, qm);
        let slope = directional_derivative(&d, &d);
        // Armijo backtracking while the predicted decrease is resolvable in floating point.
        let resolvable = 1e-4 * t * slope > 1e-13 * energy.abs().max(1e-300);
        let mut next = None;
        if resolvable {
            let mut trial_t = t;
            for _ in 0..40 {
                let cand = clamp(project_sym(&(&k - &d * c(trial_t)), qm));
                if let Ok(e) = energy_functional(&cand, qm) {
                    if e <= energy - 1e-4 * trial_t * slope {
                        next = Some((cand, e));
                        t = (trial_t * 1.25).min(t0);
                        break;
                    }
                }
                trial_t *= 0.5;
            }
        }
        let (cand, e) = match next {
            Some(v) => v,
            None => {
                let cand = clamp(project_sym(&(&k - &d * c(t0.min(t * 1.25))), qm));
                t = t0.min(t * 1.25);
                let e = energy_functional(&cand, qm)?;
                (cand, e)
            }
        };
        k = cand;
        energy = e;
    }
    let residual = projected_residual(&k, qm);
    Err(Error::ConvergenceFailure {
        stage: "riccati-variational",
        iterations: opts.max_iter,
        residual,
    })
}

/// Gradient of F(e) with respect to ē, doubled: 2[(1 − H/s) h e + (C̄/s) f ē].
fn gain_gradient(h: &CMat, f: &CMat, e: &CVec) -> Result<(f64, CVec)> {
    let (hv, cv) = mode_values(h, f, e);
    let a = cv.norm();
    if hv <= a {
        return Err(Error::PerModeGapViolated { h_ee: hv, f_abs: a });
    }
    let s = (hv * hv - a * a).sqrt();
    let g = h * e * c(2.0 * (1.0 - hv / s)) + f * linalg::conj_vec(e) * (cv.conj() * (2.0 / s));
    Ok((mode_gain(hv, a), g))
}

/// Projected gradient ascent of F on the unit sphere of range(p).
fn ascend(h: &CMat, f: &CMat, p: &CMat, start: CVec, iters: usize) -> Result<(f64, CVec)> {
    let mut e = p * start;
    let nrm = e.norm();
    if nrm < 1e-12 {
        return Ok((f64::NEG_INFINITY, e));
    }
    e.unscale_mut(nrm);
    let (mut val, mut grad) = gain_gradient(h, f, &e)?;
    let scale = linalg::spectral_norm(h).max(1e-12);
    let mut t = 0.5 / scale;
    for _ in 0..iters {
        let g = p * &grad;
        let tangent = &g - &e * c(e.dotc(&g).re);
        if tangent.norm() < 1e-14 * scale {
            break;
        }
        let mut moved = false;
        for _ in 0..30 {
            let mut cand = &e + &tangent * c(t);
            cand = p * cand;
            cand.unscale_mut(cand.norm());
            if let Ok((v, gr)) = gain_gradient(h, f, &cand) {
                if v > val {
                    e = cand;
                    val = v;
                    grad = gr;
                    t *= 1.5;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((val, e))
}

/// Value and derivative of F(e_a) + F(e_b) along a pair rotation.
struct PairRotation {
    h2: [[C64; 2]; 2],
    c2: [[C64; 2]; 2],
    imaginary: bool,
}

impl PairRotation {
    fn columns(&self, th: f64) -> ([C64; 2], [C64; 2], [C64; 2], [C64; 2]) {
        let (s, co) = th.sin_cos();
        if self.imaginary {
            let i = C64::new(0.0, 1.0);
            (
                [c(co), i * s],
                [i * s, c(co)],
                [c(-s), i * co],
                [i * co, c(-s)],
            )
        } else {
            ([c(co), c(s)], [c(-s), c(co)], [c(-s), c(co)], [c(-co), c(-s)])
        }
    }

    fn form(m: &[[C64; 2]; 2], x: &[C64; 2], y: &[C64; 2]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += x[i].conj() * m[i][j] * y[j];
            }
        }
        acc
    }

    fn eval(&self, th: f64) -> (f64, f64) {
        let (r0, r1, d0, d1) = self.columns(th);
        let mut val = 0.0;
        let mut der = 0.0;
        for (r, d) in [(r0, d0), (r1, d1)] {
            let hv = Self::form(&self.h2, &r, &r).re;
            let cv = Self::form(&self.c2, &r, &[r[0].conj(), r[1].conj()]);
            let hd = 2.0 * Self::form(&self.h2, &r, &d).re;
            let cd = Self::form(&self.c2, &r, &[d[0].conj(), d[1].conj()]) * 2.0;
            let a = cv.norm();
            let s = (hv * hv - a * a).max(1e-300).sqrt();
            val += mode_gain(hv, a);
            // d/dθ of h − s, with h − s = −a²/(h + s) to avoid cancellation.
            der += ((cv.conj() * cd).re - hd * a * a / (hv + s)) / s;
        }
        (val, der)
    }

    /// Newton iteration on the derivative with a monotone safeguard.
    fn maximize(&self) -> f64 {
        let (v0, _) = self.eval(0.0);
        let mut th = 0.0;
        let mut best = v0;
        for _ in 0..20 {
            let (_, g) = self.eval(th);
            let hstep = 1e-5;
            let curv = (self.eval(th + hstep).1 - self.eval(th - hstep).1) / (2.0 * hstep);
            let step = if curv < 0.0 { -g / curv } else { g.signum() * 0.1 };
            let step = step.clamp(-0.5, 0.5);
            if step.abs() < 1e-15 {
                break;
            }
            let mut trial = step;
            let mut moved = false;
            for _ in 0..30 {
                let (v, _) = self.eval(th + trial);
                if v >= best {
                    th += trial;
                    best = v;
                    moved = true;
                    break;
                }
                trial *= 0.5;
            }
            if !moved || trial.abs() < 1e-16 {
                break;
            }
        }
        th
    }
}

/// Apply the pair rotation (a, b, θ) to the frame and to Hm = E†hE, Cm = E†fĒ.
fn rotate(frame: &mut CMat, hm: &mut CMat, cm: &mut CMat, a: usize, b: usize, th: f64, imaginary: bool) {
    let (s, co) = th.sin_cos();
    let g: [[C64; 2]; 2] = if imaginary {
        let i = C64::new(0.0, 1.0);
        [[c(co), i * s], [i * s, c(co)]]
    } else {
        [[c(co), c(-s)], [c(s), c(co)]]
    };
    let right = |m: &mut CMat, g: &[[C64; 2]; 2]| {
        for r in 0..m.nrows() {
            let x = m[(r, a)];
            let y = m[(r, b)];
            m[(r, a)] = x * g[0][0] + y * g[1][0];
            m[(r, b)] = x * g[0][1] + y * g[1][1];
        }
    };
    let left_adj = |m: &mut CMat, g: &[[C64; 2]; 2]| {
        for col in 0..m.ncols() {
            let x = m[(a, col)];
            let y = m[(b, col)];
            m[(a, col)] = g[0][0].conj() * x + g[1][0].conj() * y;
            m[(b, col)] = g[0][1].conj() * x + g[1][1].conj() * y;
        }
    };
    let gb = [[g[0][0].conj(), g[0][1].conj()], [g[1][0].conj(), g[1][1].conj()]];
    right(frame, &g);
    right(hm, &g);
    left_adj(hm, &g);
    right(cm, &gb);
    left_adj(cm, &g);
}

fn assemble(frame: &CMat, hm: &CMat, cm: &CMat) -> Result<(CMat, Vec<(CVec, C64)>)> {
    let d = frame.nrows();
    let mut k = CMat::zeros(d, d);
    let mut modes = Vec::with_capacity(frame.ncols());
    for j in 0..frame.ncols() {
        let (zp, _) = mode_roots(hm[(j, j)].re, cm[(j, j)].conj())?;
        let e = frame.column(j).into_owned();
        k += &e * e.transpose() * zp;
        modes.push((e, zp));
    }
    Ok((k, modes))
}

/// Greedy construction of the Takagi frame of k by maximizing F mode by mode,
/// followed by pair-rotation sweeps that make the frame jointly stationary.
pub fn solve_riccati_greedy(qm: &QuadraticModel, n_modes: usize, opts: &RiccatiOptions) -> Result<PairKernel> {
    let h = qm.h_reduced();
    let f = qm.f_reduced();
    let d = h.nrows();
    let n_modes = n_modes.min(d);
    let mut found: Vec<CVec> = Vec::new();
    let mut p = CMat::identity(d, d);
    for j in 0..n_modes {
        let mut best: Option<(f64, CVec)> = None;
        for r in 0..opts.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add((j as u64) << 32 | r as u64));
            let start = CVec::from_fn(d, |_, _| c(rng.random::<f64>() - 0.5));
            let (v, e) = ascend(&h, &f, &p, start, opts.ascent_iters)?;
            if best.as_ref().is_none_or(|(bv, _)| v > *bv + 1e-14) {
                best = Some((v, e));
            }
        }
        let (_, e) = best.expect("at least one restart");
        let (hv, cv) = mode_values(&h, &f, &e);
        let (zp, _) = mode_roots(hv, cv.conj())?;
        if zp.norm() < 1e-10 {
            break;
        }
        p -= &e * e.adjoint();
        found.push(e);
    }
    // Complete the frame with an orthonormal basis of the remaining directions.
    let mut frame = CMat::zeros(d, d);
    for (j, e) in found.iter().enumerate() {
        frame.set_column(j, e);
    }
    if found.len() < d {
        let (pv, pvec) = linalg::herm_eig(&p);
        for (slot, col) in (found.len()..d).zip((0..d).rev()) {
            debug_assert!(pv[col] > 0.5);
            frame.set_column(slot, &pvec.column(col));
        }
    }
    let mut hm = frame.adjoint() * &h * &frame;
    let mut cm = frame.adjoint() * &f * linalg::conj(&frame);
    let mut trace = Vec::new();
    let (mut k_r, _) = assemble(&frame, &hm, &cm)?;
    let mut residual = linalg::frob(&ric_blocks(&h, &f, &k_r));
    trace.push(RiccatiStep {
        iter: 0,
        energy: -0.5 * (0..d).map(|j| mode_gain(hm[(j, j)].re, cm[(j, j)].norm())).sum::<f64>(),
        residual,
    });
    let mut sweep = 0;
    while residual >= opts.tol {
        if sweep >= opts.max_iter.min(500) {
            return Err(Error::ConvergenceFailure {
                stage: "riccati-greedy",
                iterations: sweep,
                residual,
            });
        }
        sweep += 1;
        for a in 0..d {
            for b in (a + 1)..d {
                for imaginary in [false, true] {
                    let rot = PairRotation {
                        h2: [[hm[(a, a)], hm[(a, b)]], [hm[(b, a)], hm[(b, b)]]],
                        c2: [[cm[(a, a)], cm[(a, b)]], [cm[(b, a)], cm[(b, b)]]],
                        imaginary,
                    };
                    let th = rot.maximize();
                    if th != 0.0 {
                        rotate(&mut frame, &mut hm, &mut cm, a, b, th, imaginary);
                    }
                }
            }
        }
        k_r = assemble(&frame, &hm, &cm)?.0;
        residual = linalg::frob(&ric_blocks(&h, &f, &k_r));
        trace.push(RiccatiStep {
            iter: sweep,
            energy: -0.5 * (0..d).map(|j| mode_gain(hm[(j, j)].re, cm[(j, j)].norm())).sum::<f64>(),
            residual,
        });
    }
    PairKernel::from_kernel(to_full(&k_r, qm), SolverTag::Greedy, qm, sweep, trace)
}

/// Positive-branch Fetter amplitudes (u_j, v_j) as columns, in φ⊥ coordinates.
#[derive(Debug, Clone)]
pub struct FetterAmplitudes {
    pub u: CMat,
    pub v: CMat,
}

/// k̄ = −V U⁻¹ from the positive-branch Fetter amplitudes.
pub fn solve_riccati_bdg(qm: &QuadraticModel, amps: &FetterAmplitudes) -> Result<PairKernel> {
    let u = &amps.u;
    let svals = linalg::singular_values(u);
    let smin = svals.last().copied().unwrap_or(0.0);
    if smin < 1e-10 * svals.first().copied().unwrap_or(1.0).max(1e-300) {
        return Err(Error::DegenerateBasis(format!("U is singular (σ_min = {smin:e})")));
    }
    let kb = -(&amps.v) * linalg::inverse(u)?;
    let k_r = linalg::conj(&kb);
    let asym = linalg::frob(&(&k_r - k_r.transpose()));
    if asym >= 1e-8 {
        return Err(Error::Degeneracy(format!("BdG kernel not symmetric (residual {asym:e})")));
    }
    let residual = linalg::frob(&ric_blocks(&qm.h_reduced(), &qm.f_reduced(), &k_r));
    let trace = vec![RiccatiStep {
        iter: 0,
        energy: energy_functional(&to_full(&k_r, qm), qm).unwrap_or(f64::NAN),
        residual,
    }];
    PairKernel::from_kernel(to_full(&k_r, qm), SolverTag::Bdg, qm, 0, trace)
}

/// Solve A X + X Aᵀ = R for X with A diagonalizable.
pub fn solve_sylvester_sym(a: &CMat, r: &CMat) -> Result<CMat> {
    let (vals, x) = linalg::eig(a);
    let xi = linalg::inverse(&x)?;
    let rt = &xi * r * xi.transpose();
    let n = vals.len();
    let mut y = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let den = vals[i] + vals[j];
            if den.norm() < 1e-12 {
                return Err(Error::Degeneracy(format!("Sylvester denominator {:e}", den.norm())));
            }
            y[(i, j)] = rt[(i, j)] / den;
        }
    }
    Ok(&x * y * x.transpose())
}

/// Newton iteration on Ric(k) = 0 in φ⊥ coordinates.
pub fn newton_polish(h: &CMat, f: &CMat, k0: &CMat, tol: f64, max_iter: usize) -> Result<(CMat, usize, f64)> {
    let fb = linalg::conj(f);
    let mut k = k0.clone();
    let mut res = linalg::frob(&ric_blocks(h, f, &k));
    for it in 0..max_iter {
        if res < tol {
            return Ok((k, it, res));
        }
        let a = h + &k * &fb;
        let delta = solve_sylvester_sym(&a, &(-ric_blocks(h, f, &k)))?;
        k = linalg::symmetric_part(&(k + delta));
        res = linalg::frob(&ric_blocks(h, f, &k));
    }
    if res < tol {
        return Ok((k, max_iter, res));
    }
    Err(Error::ConvergenceFailure {
        stage: "branch-flip",
        iterations: max_iter,
        residual: res,
    })
}

/// Replace z_j by z_j⁻ on the selected Takagi modes (1-based, in |z| order)
/// and polish the reassembled kernel back onto the Riccati solution set.
pub fn flip_branch(pk: &PairKernel, indices: &[usize], qm: &QuadraticModel, tol: f64) -> Result<PairKernel> {
    if indices.is_empty() {
        return Ok(pk.clone());
    }
    let h = qm.h_reduced();
    let f = qm.f_reduced();
    let k_r = pk.reduced(qm);
    let t = csym::takagi(&k_r, 1e-9)?;
    let n = t.modes.len();
    for &i in indices {
        if i == 0 || i > n {
            return Err(Error::InvalidIndex { index: i, len: n });
        }
    }
    let mut k = CMat::zeros(n, n);
    for (j, (e, z)) in t.modes.iter().enumerate() {
        let z = if indices.contains(&(j + 1)) {
            let (hv, cv) = mode_values(&h, &f, e);
            let zm = mode_roots(hv, cv.conj())?.1;
            if !zm.re.is_finite() || !zm.im.is_finite() {
                return Err(Error::UnpairedMode { index: j + 1 });
            }
            zm
        } else {
            *z
        };
        k += e * e.transpose() * z;
    }
    let (k, iters, res) = newton_polish(&h, &f, &k, tol, 100)?;
    let trace = vec![RiccatiStep {
        iter: iters,
        energy: f64::NAN,
        residual: res,
    }];
    PairKernel::from_kernel(to_full(&k, qm), SolverTag::Saddle, qm, iters, trace)
}
