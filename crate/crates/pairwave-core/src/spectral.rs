//! Hermite-function discretization of the one-dimensional trap.
//!
//! Units are oscillator units for −d²/dx² + ω²x², so the free spectrum is
//! (2n+1)ω. Integrals are evaluated with Gauss-Hermite quadrature; the stored
//! evaluation table absorbs the quadrature weights so that ∫ a(x) b(x) dx is a
//! plain dot product of table columns.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};

/// Declared symmetry class of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Hermitian,
    ComplexSymmetric,
    General,
}

/// Dense M×M matrix of an integral kernel in the Hermite basis.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub mat: CMat,
    pub symmetry: Symmetry,
}

impl Kernel {
    pub fn new(mat: CMat, symmetry: Symmetry) -> Self {
        Self { mat, symmetry }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Norm of the part violating the declared symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        match self.symmetry {
            Symmetry::Hermitian => linalg::frob(&(&self.mat - self.mat.adjoint())),
            Symmetry::ComplexSymmetric => linalg::frob(&(&self.mat - self.mat.transpose())),
            Symmetry::General => 0.0,
        }
    }
}

/// Physical parameters of the trapped gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapModel {
    pub omega: f64,
    pub g: f64,
    pub sigma: f64,
    pub n: usize,
}

impl TrapModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !(self.sigma > 0.0) || !(self.g >= 0.0) || self.n < 1 {
            return Err(Error::InvalidConfiguration(format!(
                "trap model requires omega>0, sigma>0, g>=0, N>=1 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Particle number as a real scalar.
    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }
}

/// Hermite basis together with its quadrature grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub m: usize,
    pub q: usize,
    /// Gauss-Hermite abscissae, ascending.
    pub nodes: Vec<f64>,
    /// Gauss-Hermite weights for the weight function exp(−x²).
    pub weights: Vec<f64>,
    /// Q×M table √(w_q e^{x_q²}) ψ_n(x_q).
    pub eval_table: DMatrix<f64>,
    /// Weights w_q e^{x_q²} for unweighted integrals.
    pub plain_weights: Vec<f64>,
}

/// Hermite-function recurrence without the Gaussian factor, carrying a running
/// log scale so that large |x| neither overflows nor underflows.
///
/// Entry n is (a_n, s_n) with ψ_n(x) = a_n · exp(s_n − x²/2).
fn scaled_hermite(x: f64, count: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let mut scale = 0.0;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    out.push((cur, scale));
    for n in 0..count - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            scale += 100.0 * std::f64::consts::LN_10;
        }
        out.push((cur, scale));
    }
    out
}

/// Hermite functions ψ_0..ψ_{count−1} at x.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    scaled_hermite(x, count)
        .into_iter()
        .map(|(a, s)| a * (s - 0.5 * x * x).exp())
        .collect()
}

/// Gauss-Hermite rule of order q: nodes from the Jacobi matrix, polished by Newton steps on ψ_q.
///
/// Returns nodes, weights for exp(−x²), and the plain weights w e^{x²}.
fn gauss_hermite(q: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let (mut nodes, _) = linalg::sym_eig_real(&jac);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = scaled_hermite(*x, q + 1);
            let (aq, sq) = h[q];
            let (ap, sp) = h[q - 1];
            let d = (2.0 * q as f64).sqrt() * ap * (sp - sq).exp() - *x * aq;
            if d != 0.0 {
                *x -= aq / d;
            }
        }
    }
    nodes.sort_by(f64::total_cmp);
    let mut plain = Vec::with_capacity(q);
    let mut weights = Vec::with_capacity(q);
    for &x in &nodes {
        let ln_sum = log_sum_squares(&scaled_hermite(x, q));
        weights.push((-ln_sum).exp());
        plain.push((x * x - ln_sum).exp());
    }
    (nodes, weights, plain)
}

/// ln Σ a_n² e^{2 s_n}.
fn log_sum_squares(h: &[(f64, f64)]) -> f64 {
    let top = h.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = h.iter().map(|(a, s)| a * a * (2.0 * (s - top)).exp()).sum();
    s.ln() + 2.0 * top
}

/// Build the M-mode basis with a Q-point rule.
pub fn build_basis(m: usize, q: usize) -> Result<SpectralBasis> {
    if m < 1 || q < m {
        return Err(Error::InvalidConfiguration(format!(
            "basis requires 1 <= M <= Q (got M={m}, Q={q})"
        )));
    }
    let (nodes, weights, plain) = gauss_hermite(q);
    let mut table = DMatrix::zeros(q, m);
    for (i, &x) in nodes.iter().enumerate() {
        let h = scaled_hermite(x, q);
        let half = 0.5 * log_sum_squares(&h);
        for n in 0..m {
            let (a, s) = h[n];
            table[(i, n)] = a * (s - half).exp();
        }
    }
    Ok(SpectralBasis {
        m,
        q,
        nodes,
        weights,
        eval_table: table,
        plain_weights: plain,
    })
}

impl SpectralBasis {
    /// Gram matrix of the basis under the quadrature rule.
    pub fn gram(&self) -> DMatrix<f64> {
        self.eval_table.transpose() * &self.eval_table
    }

    /// Weighted samples √W_q φ(x_q) of a coefficient vector.
    pub fn weighted_samples(&self, coeffs: &CVec) -> CVec {
        linalg::to_complex(&self.eval_table) * coeffs
    }

    /// Point values φ(x_q) of a coefficient vector.
    pub fn grid_values(&self, coeffs: &CVec) -> CVec {
        let mut v = self.weighted_samples(coeffs);
        for (i, z) in v.iter_mut().enumerate() {
            *z /= self.plain_weights[i].sqrt();
        }
        v
    }

    /// Unweighted quadrature ∫ u(x) dx of grid values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.plain_weights)
            .map(|(v, w)| v * w)
            .sum()
    }
}

/// Analytic matrix of −d²/dx² in the Hermite basis.
pub fn second_derivative_part(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        let (lo, hi) = (i.min(j), i.max(j));
        if i == j {
            i as f64 + 0.5
        } else if hi == lo + 2 {
            -0.5 * (((lo + 1) * (lo + 2)) as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// Galerkin matrix of multiplication by a grid function.
pub fn grid_to_operator(basis: &SpectralBasis, values: &[f64]) -> Kernel {
    let a = &basis.eval_table;
    let mut scaled = a.clone();
    for (i, v) in values.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*v);
    }
    let mat = a.transpose() * scaled;
    let sym = (&mat + mat.transpose()) * 0.5;
    Kernel::new(linalg::to_complex(&sym), Symmetry::Hermitian)
}

/// ε = −d²/dx² + ω²x² in the Hermite basis.
pub fn assemble_kinetic_trap(basis: &SpectralBasis, omega: f64) -> Kernel {
    let x2: Vec<f64> = basis.nodes.iter().map(|x| omega * omega * x * x).collect();
    let pot = grid_to_operator(basis, &x2);
    let kin = linalg::to_complex(&second_derivative_part(basis.m));
    Kernel::new(kin + pot.mat, Symmetry::Hermitian)
}

/// Table υ(x_q − x_q') of the normalized Gaussian interaction of mass g and width σ.
pub fn interaction_on_grid(basis: &SpectralBasis, g: f64, sigma: f64) -> DMatrix<f64> {
    let pref = g / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    DMatrix::from_fn(basis.q, basis.q, |i, j| {
        let d = basis.nodes[i] - basis.nodes[j];
        pref * (-d * d / (2.0 * sigma * sigma)).exp()
    })
}

/// Grid values of υ∗|φ|².
pub fn convolve_density(basis: &SpectralBasis, table: &DMatrix<f64>, phi: &CVec) -> Vec<f64> {
    let d = basis.weighted_samples(phi);
    let rho_w: nalgebra::DVector<f64> = d.map(|z| z.norm_sqr());
    let conv = table * rho_w;
    conv.iter().map(|v| v.max(0.0)).collect()
}

/// Coefficients of the n-th basis mode.
pub fn unit_mode(m: usize, n: usize) -> CVec {
    let mut v = CVec::zeros(m);
    v[n] = c(1.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_mode_value_at_origin() {
        let b = build_basis(1, 2).unwrap();
        let phi = unit_mode(1, 0);
        // Evaluate ψ_0 directly at x = 0.
        let v = hermite_functions(0.0, 1)[0];
        assert!((v - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
        assert!((v - 0.751126).abs() < 1e-6);
        assert_eq!(b.grid_values(&phi).len(), 2);
    }

    #[test]
    fn rejects_q_below_m() {
        assert!(matches!(build_basis(8, 4), Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn gram_is_identity() {
        for (m, q) in [(8, 16), (32, 64), (64, 128)] {
            let b = build_basis(m, q).unwrap();
            let g = b.gram();
            let err = (g - DMatrix::identity(m, m)).abs().max();
            assert!(err < 1e-12, "M={m} gram error {err:e}");
        }
    }

    #[test]
    fn quadrature_integrates_gaussian_weight() {
        let b = build_basis(32, 64).unwrap();
        let s: f64 = b.weights.iter().sum();
        assert!((s - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(b.weights.iter().all(|w| *w > 0.0));
        assert!(b.nodes.windows(2).all(|p| p[0] < p[1]));
        // x² e^{-x²} integrates to √π/2.
        let s2: f64 = b.nodes.iter().zip(&b.weights).map(|(x, w)| x * x * w).sum();
        assert!((s2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn kinetic_trap_is_oscillator_diagonal() {
        let b = build_basis(4, 8).unwrap();
        let eps = assemble_kinetic_trap(&b, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 2.0 * i as f64 + 1.0 } else { 0.0 };
                assert!((eps.mat[(i, j)].re - want).abs() < 1e-10);
            }
        }
        let b = build_basis(32, 64).unwrap();
        let eps = assemble_kinetic_trap(&b, 1.0);
        for i in 0..32 {
            assert!((eps.mat[(i, i)].re - (2 * i + 1) as f64).abs() < 1e-10);
        }
        assert!(eps.symmetry_residual() < 1e-12);
    }

    #[test]
    fn kinetic_trap_scaled_frequency_matches_dense_eigensolve() {
        // Oracle: eigenvalues of the Galerkin matrix of −D² + 4x², computed
        // independently from analytic x² matrix elements.
        let m = 32;
        let b = build_basis(m, 2 * m).unwrap();
        let eps = assemble_kinetic_trap(&b, 2.0);
        let x2 = DMatrix::from_fn(m, m, |i, j| {
            let (lo, hi) = (i.min(j), i.max(j));
            if i == j {
                i as f64 + 0.5
            } else if hi == lo + 2 {
                0.5 * (((lo + 1) * (lo + 2)) as f64).sqrt()
            } else {
                0.0
            }
        });
        let oracle = second_derivative_part(m) + x2 * 4.0;
        let (ev_oracle, _) = linalg::sym_eig_real(&oracle);
        let (ev, _) = linalg::herm_eig(&eps.mat);
        for (a, b) in ev.iter().zip(&ev_oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        // Low levels approach the analytic (2n+1)·2 values.
        assert!((ev[0] - 2.0).abs() < 1e-8);
        assert!((ev[1] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn grid_operator_identities() {
        let b = build_basis(12, 24).unwrap();
        let one = grid_to_operator(&b, &vec![1.0; b.q]);
        assert!(linalg::frob(&(one.mat - CMat::identity(12, 12))) < 1e-12);
        let zero = grid_to_operator(&b, &vec![0.0; b.q]);
        assert!(linalg::frob(&zero.mat) == 0.0);
        let x2: Vec<f64> = b.nodes.iter().map(|x| x * x).collect();
        let xop = grid_to_operator(&b, &x2);
        let eps = assemble_kinetic_trap(&b, 1.0);
        let d2 = linalg::to_complex(&second_derivative_part(12));
        assert!(linalg::frob(&(eps.mat - d2 - xop.mat)) < 1e-12);
    }

    #[test]
    fn interaction_table_properties() {
        let b = build_basis(32, 64).unwrap();
        let zero = interaction_on_grid(&b, 0.0, 0.5);
        assert_eq!(zero.abs().max(), 0.0);
        let t = interaction_on_grid(&b, 1.0, 0.5);
        assert!((&t - t.transpose()).abs().max() < 1e-15);
        assert!(t.iter().all(|v| *v >= 0.0));
        // Row quadrature near the centre integrates the Gaussian to g.
        let centre = b.q / 2;
        let row: Vec<f64> = t.row(centre).iter().cloned().collect();
        assert!((b.integrate(&row) - 1.0).abs() < 1e-6);
        // Flat limit.
        let wide = interaction_on_grid(&b, 1.0, 1e4);
        let flat = 1.0 / (1e4 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((wide[(centre, centre + 1)] - flat).abs() < 1e-9 * flat.max(1.0));
    }

    #[test]
    fn convolution_properties() {
        let b = build_basis(32, 64).unwrap();
        let phi = unit_mode(32, 0);
        let zero = convolve_density(&b, &interaction_on_grid(&b, 0.0, 0.5), &phi);
        assert!(zero.iter().all(|v| *v == 0.0));
        let conv = convolve_density(&b, &interaction_on_grid(&b, 1.0, 0.5), &phi);
        assert!(conv.iter().all(|v| *v >= 0.0));
        assert!((b.integrate(&conv) - 1.0).abs() < 1e-8);
        // Narrow interaction approaches g|φ|² pointwise; a fine grid resolves σ = 0.05.
        let fine = build_basis(4, 1200).unwrap();
        let phi = unit_mode(4, 0);
        let vals = fine.grid_values(&phi);
        let i = fine.q / 2;
        let mut prev = f64::INFINITY;
        for sigma in [0.2, 0.1, 0.05] {
            let cs = convolve_density(&fine, &interaction_on_grid(&fine, 1.0, sigma), &phi);
            let err = (cs[i] - vals[i].norm_sqr()).abs();
            assert!(err < prev, "σ={sigma}: {err:e} vs {prev:e}");
            prev = err;
        }
        assert!(prev < 3e-3 * vals[i].norm_sqr());
    }
}
