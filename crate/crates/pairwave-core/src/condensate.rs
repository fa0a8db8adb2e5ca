//! Hartree ground state of the trapped gas.
//!
//! The one-particle Hartree operator is H_H = ε + N(υ∗|φ|²). The solver is an
//! Anderson-accelerated self-consistent field iteration on the mean-field
//! potential with a damped fallback. An iterate is accepted if it lowers the
//! Hartree energy, or, once energy changes reach roundoff, the residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CVec};
use crate::spectral::{self, SpectralBasis, TrapModel};

/// One accepted iterate of the self-consistent field loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HartreeStep {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
}

/// Converged condensate.
#[derive(Debug, Clone)]
pub struct CondensateSolution {
    /// Real, unit-norm coefficients with positive integral.
    pub phi: CVec,
    pub mu: f64,
    pub e_h: f64,
    pub residual: f64,
    pub iterations: usize,
    pub n: usize,
    pub trace: Vec<HartreeStep>,
}

/// Solver options.
#[derive(Debug, Clone, Copy)]
pub struct HartreeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mixing: f64,
}

impl Default for HartreeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            mixing: 0.5,
        }
    }
}

/// Precomputed pieces of the Hartree functional.
pub struct HartreeContext<'a> {
    pub basis: &'a SpectralBasis,
    pub model: TrapModel,
    pub eps: DMatrix<f64>,
    pub table: DMatrix<f64>,
}

impl<'a> HartreeContext<'a> {
    pub fn new(model: &TrapModel, basis: &'a SpectralBasis) -> Self {
        let eps = spectral::assemble_kinetic_trap(basis, model.omega).mat.map(|z| z.re);
        let table = spectral::interaction_on_grid(basis, model.g, model.sigma);
        Self {
            basis,
            model: *model,
            eps,
            table,
        }
    }

    pub fn conv(&self, phi: &CVec) -> Vec<f64> {
        spectral::convolve_density(self.basis, &self.table, phi)
    }

    /// H_H for a given mean-field potential on the grid.
    pub fn operator(&self, conv: &[f64]) -> DMatrix<f64> {
        let n = self.model.n_f64();
        let pot: Vec<f64> = conv.iter().map(|v| n * v).collect();
        &self.eps + spectral::grid_to_operator(self.basis, &pot).mat.map(|z| z.re)
    }

    /// ⟨φ, εφ⟩.
    pub fn kinetic(&self, phi: &CVec) -> f64 {
        let re = phi.map(|z| z.re);
        let im = phi.map(|z| z.im);
        re.dot(&(&self.eps * &re)) + im.dot(&(&self.eps * &im))
    }

    /// ⟨|φ|², υ∗|φ|²⟩.
    pub fn interaction(&self, phi: &CVec) -> f64 {
        let d = self.basis.weighted_samples(phi);
        let conv = self.conv(phi);
        d.iter().zip(&conv).map(|(z, v)| z.norm_sqr() * v).sum()
    }

    pub fn energy(&self, phi: &CVec) -> f64 {
        self.kinetic(phi) + 0.5 * self.model.n_f64() * self.interaction(phi)
    }

    pub fn chemical_potential(&self, phi: &CVec) -> f64 {
        self.kinetic(phi) + self.model.n_f64() * self.interaction(phi)
    }

    /// ‖H_H(φ)φ − μφ‖ with μ the Rayleigh quotient.
    pub fn residual(&self, phi: &CVec) -> (f64, f64) {
        let h = linalg::to_complex(&self.operator(&self.conv(phi)));
        let hp = &h * phi;
        let mu = phi.dotc(&hp).re;
        ((hp - phi * c(mu)).norm(), mu)
    }

    /// Lowest eigenvector of H_H for the given potential, real with positive integral.
    fn ground_vector(&self, conv: &[f64]) -> CVec {
        let (_, vecs) = linalg::sym_eig_real(&self.operator(conv));
        let v: DVector<f64> = vecs.column(0).into_owned();
        let mut phi = v.map(c);
        phi.unscale_mut(phi.norm());
        normalize_sign(self.basis, &mut phi);
        phi
    }
}

/// Flip φ so that ∫φ dx > 0.
fn normalize_sign(basis: &SpectralBasis, phi: &mut CVec) {
    let d = basis.weighted_samples(phi);
    let integral: f64 = d
        .iter()
        .zip(&basis.plain_weights)
        .filter(|(_, w)| w.is_finite())
        .map(|(z, w)| z.re * w.sqrt())
        .sum();
    if integral < 0.0 {
        phi.neg_mut();
    }
}

/// Damped self-consistent field solution of the Hartree equation.
pub fn solve_hartree(
    model: &TrapModel,
    basis: &SpectralBasis,
    opts: HartreeOptions,
) -> Result<CondensateSolution> {
    model.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfiguration("Hartree tolerance must be positive".into()));
    }
    let ctx = HartreeContext::new(model, basis);
    // `pot` is the mean-field input whose ground state is the current φ.
    let mut pot = vec![0.0; basis.q];
    let mut phi = ctx.ground_vector(&pot);
    let mut energy = ctx.energy(&phi);
    let mut trace = Vec::new();
    let (mut residual, _) = ctx.residual(&phi);
    trace.push(HartreeStep {
        iter: 0,
        energy,
        residual,
    });
    let mut step = opts.mixing;
    let mut tau = 1.0 / ctx.operator(&pot).norm();
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut iter = 0;
    while residual >= opts.tol {
        if iter >= opts.max_iter {
            return Err(Error::ConvergenceFailure {
                stage: "hartree",
                iterations: iter,
                residual,
            });
        }
        iter += 1;
        let out = ctx.conv(&phi);
        let gap: Vec<f64> = out.iter().zip(&pot).map(|(a, b)| a - b).collect();
        history.push((pot.clone(), gap.clone()));
        if history.len() > ANDERSON_DEPTH + 1 {
            history.remove(0);
        }
        // Energy changes are O(r²); near convergence they sink below roundoff
        // and the residual decides.
        let noise = 1e-12 * energy.abs().max(1.0);
        let try_step = |trial: Vec<f64>| {
            let cand = ctx.ground_vector(&trial);
            let e = ctx.energy(&cand);
            let r = ctx.residual(&cand).0;
            (e < energy - noise || (e <= energy + noise && r < residual)).then_some((trial, cand, e, r))
        };
        let mut accepted = anderson_step(&history, step).and_then(&try_step);
        if accepted.is_none() {
            // Damped step toward the self-consistent potential.
            let mut alpha = step;
            while alpha >= MIN_MIXING {
                let trial: Vec<f64> = pot.iter().zip(&gap).map(|(a, d)| a + alpha * d).collect();
                if let Some(acc) = try_step(trial) {
                    accepted = Some(acc);
                    break;
                }
                alpha *= 0.5;
            }
            step = (1.5 * alpha).clamp(MIN_MIXING, 1.0);
        }
        if let Some((trial, cand, e, r)) = accepted {
            pot = trial;
            phi = cand;
            energy = e;
            residual = r;
        } else {
            // The ground state of the trial operators jumps (near-degenerate levels), so
            // mixing stalls. Descend on the energy directly along the sphere.
            let (cand, e, r, used) = sphere_descent(&ctx, &phi, energy, residual, tau).ok_or(
                Error::ConvergenceFailure {
                    stage: "hartree",
                    iterations: iter,
                    residual,
                },
            )?;
            tau = 1.5 * used;
            pot = ctx.conv(&cand);
            history.clear();
            phi = cand;
            energy = e;
            residual = r;
        }
        trace.push(HartreeStep {
            iter,
            energy,
            residual,
        });
    }
    let (residual, mu) = ctx.residual(&phi);
    Ok(CondensateSolution {
        e_h: ctx.energy(&phi),
        mu,
        residual,
        iterations: iter,
        n: model.n,
        phi,
        trace,
    })
}

const ANDERSON_DEPTH: usize = 6;
const MIN_MIXING: f64 = 1e-6;

/// Armijo step φ ← (φ − τ(H_Hφ − μφ))/‖·‖ starting from `tau`; returns the new
/// state, its energy and residual, and the step used.
fn sphere_descent(ctx: &HartreeContext, phi: &CVec, energy: f64, residual: f64, tau: f64) -> Option<(CVec, f64, f64, f64)> {
    let h = linalg::to_complex(&ctx.operator(&ctx.conv(phi)));
    let hp = &h * phi;
    let mu = phi.dotc(&hp).re;
    let d = hp - phi * c(mu);
    let slope = 2.0 * d.norm_squared();
    let noise = 1e-12 * energy.abs().max(1.0);
    let mut t = tau;
    for _ in 0..60 {
        let mut cand = phi - &d * c(t);
        cand.unscale_mut(cand.norm());
        let e = ctx.energy(&cand);
        let r = ctx.residual(&cand).0;
        if e <= energy - 1e-4 * t * slope || (e <= energy + noise && r < residual) {
            return Some((cand, e, r, t));
        }
        t *= 0.5;
    }
    None
}

/// Anderson extrapolation with mixing `beta` from (input potential, output − input)
/// pairs, oldest first.
fn anderson_step(history: &[(Vec<f64>, Vec<f64>)], beta: f64) -> Option<Vec<f64>> {
    let k = history.len().checked_sub(1).filter(|&k| k > 0)?;
    let (x, f) = &history[k];
    let q = x.len();
    let dx = DMatrix::from_fn(q, k, |i, j| history[j + 1].0[i] - history[j].0[i]);
    let df = DMatrix::from_fn(q, k, |i, j| history[j + 1].1[i] - history[j].1[i]);
    let rhs = DVector::from_column_slice(f);
    let gamma = df.clone().svd(true, true).solve(&rhs, 1e-12 * df.norm()).ok()?;
    let next = DVector::from_column_slice(x) + &rhs * beta - (dx + df * beta) * gamma;
    next.iter().all(|v| v.is_finite()).then(|| next.iter().copied().collect())
}

/// E_H = ⟨φ,εφ⟩ + (N/2)⟨|φ|², υ∗|φ|²⟩.
pub fn hartree_energy(phi: &CVec, model: &TrapModel, basis: &SpectralBasis) -> f64 {
    HartreeContext::new(model, basis).energy(phi)
}

/// μ = ⟨φ,εφ⟩ + N⟨|φ|², υ∗|φ|²⟩.
pub fn chemical_potential(phi: &CVec, model: &TrapModel, basis: &SpectralBasis) -> f64 {
    HartreeContext::new(model, basis).chemical_potential(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_basis;

    fn model(g: f64, n: usize) -> TrapModel {
        TrapModel {
            omega: 1.0,
            g,
            sigma: 0.5,
            n,
        }
    }

    #[test]
    fn free_gas_is_ground_mode() {
        let b = build_basis(32, 64).unwrap();
        let sol = solve_hartree(&model(0.0, 100), &b, HartreeOptions::default()).unwrap();
        assert!((sol.mu - 1.0).abs() < 1e-10);
        assert!((sol.e_h - 1.0).abs() < 1e-10);
        assert!((sol.phi[0].re - 1.0).abs() < 1e-12);
        assert!(sol.phi.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn interacting_identities() {
        let b = build_basis(32, 64).unwrap();
        let m = model(0.01, 100);
        let sol = solve_hartree(&m, &b, HartreeOptions::default()).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(sol.mu > 1.0);
        assert!((sol.phi.norm() - 1.0).abs() < 1e-12);
        let ctx = HartreeContext::new(&m, &b);
        // Right side evaluated with an independent grid sum.
        let d = b.grid_values(&sol.phi);
        let conv = ctx.conv(&sol.phi);
        let integrand: Vec<f64> = d.iter().zip(&conv).map(|(z, v)| z.norm_sqr() * v).collect();
        let rhs = 0.5 * 100.0 * b.integrate(&integrand);
        assert!((sol.mu - sol.e_h - rhs).abs() < 1e-8);
        assert!(sol.mu >= sol.e_h);
        assert!((chemical_potential(&sol.phi, &m, &b) - sol.mu).abs() < 1e-8);
        assert!((hartree_energy(&sol.phi, &m, &b) - sol.e_h).abs() < 1e-14);
    }

    #[test]
    fn energy_is_monotone_along_trace() {
        let b = build_basis(32, 64).unwrap();
        for (g, n) in [(0.01, 100), (0.1, 100), (0.5, 10)] {
            let sol = solve_hartree(&model(g, n), &b, HartreeOptions::default()).unwrap();
            for w in sol.trace.windows(2) {
                assert!(w[1].energy <= w[0].energy + 1e-12, "{:?}", w);
            }
        }
    }

    #[test]
    fn strong_coupling_converges() {
        // N·g = 100; at M = 8 plain mixing stalls on near-degenerate trial levels.
        for m in [8, 12, 32] {
            let b = build_basis(m, 2 * m).unwrap();
            let sol = solve_hartree(&model(1.0, 100), &b, HartreeOptions::default()).unwrap();
            assert!(sol.residual < 1e-10, "M = {m}: {}", sol.residual);
            assert!(sol.mu > sol.e_h);
            for w in sol.trace.windows(2) {
                assert!(w[1].energy <= w[0].energy * (1.0 + 1e-12), "{:?}", w);
            }
        }
    }

    #[test]
    fn small_coupling_first_order_shift() {
        // Oracle: μ ≈ 1 + N g / √(2π(1+σ²)) from the Gaussian overlap of φ₀².
        let b = build_basis(32, 64).unwrap();
        let g = 1e-5;
        let sol = solve_hartree(&model(g, 100), &b, HartreeOptions::default()).unwrap();
        let first = 100.0 * g / (2.0 * std::f64::consts::PI * 1.25).sqrt();
        assert!((sol.mu - 1.0 - first).abs() < 1e-3 * first);
    }

    #[test]
    fn mu_depends_on_product_ng() {
        let b = build_basis(24, 48).unwrap();
        let a = solve_hartree(&model(0.01, 100), &b, HartreeOptions::default()).unwrap();
        let d = solve_hartree(&model(0.005, 200), &b, HartreeOptions::default()).unwrap();
        assert!((a.mu - d.mu).abs() < 1e-9);
    }

    #[test]
    fn free_energy_is_rayleigh_quotient() {
        let b = build_basis(8, 16).unwrap();
        let m = model(0.0, 5);
        let mut phi = CVec::from_fn(8, |i, _| c(1.0 / (1.0 + i as f64)));
        phi.unscale_mut(phi.norm());
        let want: f64 = (0..8).map(|i| (2 * i + 1) as f64 * phi[i].norm_sqr()).sum();
        assert!((hartree_energy(&phi, &m, &b) - want).abs() < 1e-12);
        assert!((chemical_potential(&phi, &m, &b) - want).abs() < 1e-12);
    }
}
