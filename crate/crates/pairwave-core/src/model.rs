//! Kernels of the quadratic model around the condensate.
//!
//! h = ε + N(υ∗|φ|²) + Nγ − μ, f = N φ(x)υ(x−y)φ(y), γ = φ(x)υ(x−y)φ̄(y), and
//! δ̂ = δ − φφ†. Projections onto φ⊥ are taken in the full M-dimensional space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condensate::{CondensateSolution, HartreeContext};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::spectral::{Kernel, SpectralBasis, Symmetry, TrapModel};

/// Kernels of the quadratic model.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub h: Kernel,
    pub f: Kernel,
    pub gamma: Kernel,
    pub proj: Kernel,
    pub h_perp: Kernel,
    pub f_perp: Kernel,
    pub phi: CVec,
    /// Orthonormal basis of φ⊥, one column per direction.
    pub perp_basis: CMat,
    pub e_h: f64,
    pub mu: f64,
    pub n: f64,
}

/// δ̂ = δ − φφ†.
pub fn projector(phi: &CVec) -> CMat {
    CMat::identity(phi.len(), phi.len()) - phi * phi.adjoint()
}

/// δ̂ A δ̂.
pub fn project_perp(a: &CMat, phi: &CVec) -> CMat {
    let p = projector(phi);
    &p * a * &p
}

/// δ̂ A δ̂ᵀ, the projection preserving complex symmetry.
pub fn project_perp_sym(a: &CMat, phi: &CVec) -> CMat {
    let p = projector(phi);
    &p * a * p.transpose()
}

/// Assemble h, f, γ and δ̂ from a converged condensate.
pub fn build_model(sol: &CondensateSolution, model: &TrapModel, basis: &SpectralBasis) -> QuadraticModel {
    let ctx = HartreeContext::new(model, basis);
    let n = model.n_f64();
    let m = basis.m;
    let conv = ctx.conv(&sol.phi);
    let hh = linalg::to_complex(&ctx.operator(&conv));
    let a = linalg::to_complex(&basis.eval_table);
    let d = basis.weighted_samples(&sol.phi);
    let u = linalg::to_complex(&ctx.table);
    // γ = Aᵀ D U D̄ A and f = N Aᵀ D U D A with D = diag(Aφ).
    let da = CMat::from_fn(basis.q, m, |i, j| d[i] * a[(i, j)]);
    let dbar_a = CMat::from_fn(basis.q, m, |i, j| d[i].conj() * a[(i, j)]);
    let u_dbar = &u * dbar_a;
    let gamma = da.transpose() * u_dbar;
    let u_d = &u * &da;
    let f = (da.transpose() * u_d) * c(n);
    let gamma = linalg::hermitian_part(&gamma);
    let f = linalg::symmetric_part(&f);
    let h = linalg::hermitian_part(&(hh + &gamma * c(n) - CMat::identity(m, m) * c(sol.mu)));
    QuadraticModel::from_parts(h, f, gamma, sol.phi.clone(), sol.e_h, sol.mu, n)
}

impl QuadraticModel {
    /// Assemble the model from its one-particle blocks.
    pub fn from_parts(h: CMat, f: CMat, gamma: CMat, phi: CVec, e_h: f64, mu: f64, n: f64) -> Self {
        let proj = projector(&phi);
        let h_perp = &proj * &h * &proj;
        let f_perp = &proj * &f * proj.transpose();
        let perp_basis = linalg::complement_basis(&phi);
        Self {
            h: Kernel::new(h, Symmetry::Hermitian),
            f: Kernel::new(f, Symmetry::ComplexSymmetric),
            gamma: Kernel::new(gamma, Symmetry::Hermitian),
            proj: Kernel::new(proj, Symmetry::Hermitian),
            h_perp: Kernel::new(h_perp, Symmetry::Hermitian),
            f_perp: Kernel::new(f_perp, Symmetry::ComplexSymmetric),
            phi,
            perp_basis,
            e_h,
            mu,
            n,
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// h_⊥ in coordinates of the φ⊥ basis.
    pub fn h_reduced(&self) -> CMat {
        let q = &self.perp_basis;
        q.adjoint() * &self.h.mat * q
    }

    /// f_⊥ in coordinates of the φ⊥ basis (bilinear pairing).
    pub fn f_reduced(&self) -> CMat {
        let q = &self.perp_basis;
        q.adjoint() * &self.f.mat * linalg::conj(q)
    }

    /// The same model with the pairing kernel f multiplied by `s`.
    pub fn with_scaled_pairing(&self, s: f64) -> Self {
        Self::from_parts(
            self.h.mat.clone(),
            &self.f.mat * c(s),
            self.gamma.mat.clone(),
            self.phi.clone(),
            self.e_h,
            self.mu,
            self.n,
        )
    }

    /// Restrict the model to the span of orthonormal columns `b`, whose first column is φ.
    pub fn compress(&self, b: &CMat) -> Result<Self> {
        let m = b.ncols();
        if m < 2 || b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "compression basis is {}x{}",
                b.nrows(),
                m
            )));
        }
        let lead = b.column(0).into_owned();
        if (lead - &self.phi).norm() > 1e-10 {
            return Err(Error::InvalidInput("first compression vector must be φ".into()));
        }
        let h = b.adjoint() * &self.h.mat * b;
        let f = b.adjoint() * &self.f.mat * linalg::conj(b);
        let gamma = b.adjoint() * &self.gamma.mat * b;
        let mut phi = CVec::zeros(m);
        phi[0] = c(1.0);
        Ok(Self::from_parts(
            linalg::hermitian_part(&h),
            linalg::symmetric_part(&f),
            linalg::hermitian_part(&gamma),
            phi,
            self.e_h,
            self.mu,
            self.n,
        ))
    }
}

/// Result of the gap-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// Minimum found of h(ē,e) − |f(ē,ē)| over unit e ⊥ φ.
    pub c_estimate: f64,
    /// λ_min(h_⊥) − σ_max(f_⊥), a lower bound for the true minimum.
    pub certificate: f64,
}

fn gap_value(h: &CMat, f: &CMat, e: &CVec) -> (f64, C64) {
    let hv = e.dotc(&(h * e)).re;
    let cv = e.dotc(&(f * linalg::conj_vec(e)));
    (hv - cv.norm(), cv)
}

/// Estimate the gap constant by projected gradient descent on the unit sphere of φ⊥.
pub fn check_gap_condition(qm: &QuadraticModel, restarts: usize, iters: usize, seed: u64) -> Result<GapReport> {
    let h = qm.h_reduced();
    let f = qm.f_reduced();
    let d = h.nrows();
    let (hv, hvec) = linalg::herm_eig(&h);
    let fmax = linalg::spectral_norm(&f);
    let certificate = hv[0] - fmax;
    let step0 = 0.5 / hv[d - 1].abs().max(hv[0].abs()).max(1e-12);
    let mut best = f64::INFINITY;
    for r in 0..restarts.max(1) {
        let mut e = if r == 0 {
            hvec.column(0).into_owned()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r as u64 + 1)));
            CVec::from_fn(d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        };
        e.unscale_mut(e.norm());
        let (mut val, mut cv) = gap_value(&h, &f, &e);
        let mut t = step0;
        for _ in 0..iters {
            let mut grad = &h * &e * c(2.0);
            if cv.norm() > 1e-300 {
                grad -= &f * linalg::conj_vec(&e) * (cv.conj() / cv.norm() * 2.0);
            }
            let radial = e.dotc(&grad).re;
            let tangent = grad - &e * c(radial);
            if tangent.norm() < 1e-15 {
                break;
            }
            let mut improved = false;
            for _ in 0..30 {
                let mut trial = &e - &tangent * c(t);
                trial.unscale_mut(trial.norm());
                let (tv, tc) = gap_value(&h, &f, &trial);
                if tv < val {
                    e = trial;
                    val = tv;
                    cv = tc;
                    t *= 1.5;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.min(val);
    }
    let report = GapReport {
        c_estimate: best,
        certificate,
    };
    if report.c_estimate <= 0.0 {
        return Err(Error::GapConditionViolated {
            c_estimate: report.c_estimate,
            certificate,
        });
    }
    Ok(report)
}

/// Regime-of-validity ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepletionBound {
    pub n: f64,
    pub f_hs_over_n: f64,
    pub f_perp_over_c: f64,
}

pub fn depletion_bound_report(qm: &QuadraticModel, gap: &GapReport) -> DepletionBound {
    DepletionBound {
        n: qm.n,
        f_hs_over_n: linalg::frob(&qm.f.mat) / qm.n,
        f_perp_over_c: linalg::spectral_norm(&qm.f_perp.mat) / gap.c_estimate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensate::{solve_hartree, HartreeOptions};
    use crate::spectral::build_basis;

    fn setup(g: f64, n: usize, m: usize) -> (QuadraticModel, SpectralBasis, TrapModel, CondensateSolution) {
        let b = build_basis(m, 2 * m).unwrap();
        let tm = TrapModel {
            omega: 1.0,
            g,
            sigma: 0.5,
            n,
        };
        let sol = solve_hartree(&tm, &b, HartreeOptions::default()).unwrap();
        (build_model(&sol, &tm, &b), b, tm, sol)
    }

    #[test]
    fn free_model_kernels() {
        let (qm, ..) = setup(0.0, 100, 16);
        for i in 0..16 {
            assert!((qm.h.mat[(i, i)].re - 2.0 * i as f64).abs() < 1e-10);
        }
        assert_eq!(linalg::frob(&qm.f.mat), 0.0);
        assert_eq!(linalg::frob(&qm.gamma.mat), 0.0);
        let (ev, _) = linalg::herm_eig(&qm.h_reduced());
        for (j, e) in ev.iter().enumerate() {
            assert!((e - 2.0 * (j + 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn interacting_invariants() {
        let (qm, b, tm, sol) = setup(0.01, 100, 32);
        assert!(qm.h.symmetry_residual() < 1e-12);
        assert!(qm.f.symmetry_residual() < 1e-12);
        assert!(qm.gamma.symmetry_residual() < 1e-12);
        assert!((&qm.proj.mat * &qm.phi).norm() < 1e-12);
        let p2 = &qm.proj.mat * &qm.proj.mat;
        assert!(linalg::frob(&(p2 - &qm.proj.mat)) < 1e-10);
        // hφ = f φ̄ = N φ·(υ∗|φ|²)
        let hphi = &qm.h.mat * &qm.phi;
        let fphi = &qm.f.mat * linalg::conj_vec(&qm.phi);
        assert!((&hphi - &fphi).norm() < 1e-10);
        // Galerkin projection of N φ(x)(υ∗|φ|²)(x), summed on the grid independently.
        let ctx = HartreeContext::new(&tm, &b);
        let conv = ctx.conv(&sol.phi);
        let vals = b.grid_values(&sol.phi);
        let samples = b.weighted_samples(&sol.phi);
        let mut worst: f64 = 0.0;
        for n in 0..b.m {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..b.q {
                acc += samples[i] * c(100.0 * conv[i] * b.eval_table[(i, n)]);
            }
            worst = worst.max((hphi[n] - acc).norm());
        }
        assert!(worst < 1e-8, "Galerkin identity error {worst:e}");
        // ⟨φ, hφ⟩ = N⟨|φ|², υ∗|φ|²⟩ by an independent grid sum.
        let integrand: Vec<f64> = vals.iter().zip(&conv).map(|(z, v)| z.norm_sqr() * v).collect();
        let rhs = 100.0 * b.integrate(&integrand);
        assert!((qm.phi.dotc(&hphi).re - rhs).abs() < 1e-8);
    }

    #[test]
    fn projection_examples() {
        let mut phi = CVec::from_fn(6, |i, _| c((i as f64 + 1.0).sin()));
        phi.unscale_mut(phi.norm());
        let id = CMat::identity(6, 6);
        assert!(linalg::frob(&(project_perp(&id, &phi) - projector(&phi))) < 1e-12);
        assert!(linalg::frob(&project_perp(&(&phi * phi.adjoint()), &phi)) < 1e-12);
        let a = CMat::from_fn(6, 6, |i, j| C64::new((i * j) as f64 * 0.1, i as f64 - j as f64));
        let p = project_perp(&a, &phi);
        assert!((&p * &phi).norm() < 1e-12);
        assert!((phi.adjoint() * &p).norm() < 1e-12);
        // Entrywise triple product.
        let d = projector(&phi);
        for i in 0..6 {
            for j in 0..6 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..6 {
                    for l in 0..6 {
                        s += d[(i, k)] * a[(k, l)] * d[(l, j)];
                    }
                }
                assert!((s - p[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gap_condition_free_and_interacting() {
        let (qm, ..) = setup(0.0, 100, 16);
        let g = check_gap_condition(&qm, 16, 200, 7).unwrap();
        assert!((g.c_estimate - 2.0).abs() < 1e-10);
        let (qm, ..) = setup(0.01, 100, 32);
        let g = check_gap_condition(&qm, 16, 200, 7).unwrap();
        assert!(g.c_estimate > 0.0);
        assert!(g.c_estimate >= g.certificate - 1e-12);
    }

    #[test]
    fn adversarial_pairing_violates_gap() {
        let (qm, ..) = setup(0.01, 100, 32);
        let bad = qm.with_scaled_pairing(100.0);
        let err = check_gap_condition(&bad, 16, 200, 7).unwrap_err();
        match err {
            Error::GapConditionViolated { certificate, .. } => assert!(certificate < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depletion_ratios() {
        let (qm0, ..) = setup(0.0, 100, 16);
        let g0 = check_gap_condition(&qm0, 4, 50, 1).unwrap();
        let r0 = depletion_bound_report(&qm0, &g0);
        assert_eq!(r0.f_hs_over_n, 0.0);
        assert_eq!(r0.f_perp_over_c, 0.0);
        let (qm, ..) = setup(0.01, 100, 24);
        let g = check_gap_condition(&qm, 4, 50, 1).unwrap();
        let r = depletion_bound_report(&qm, &g);
        assert!(r.f_hs_over_n < 1.0 && r.f_perp_over_c < 1.0);
        let (qm10, ..) = setup(0.1, 10, 24);
        let g10 = check_gap_condition(&qm10, 4, 50, 1).unwrap();
        let r10 = depletion_bound_report(&qm10, &g10);
        assert!(r10.f_hs_over_n > r.f_hs_over_n);
    }
}
