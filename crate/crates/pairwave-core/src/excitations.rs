//! Excitation spectrum of h_ph = h + k f̄ on φ⊥ and the Fetter symplectic system.
//!
//! With S = δ̂ − k k̄ the operator κ = S^(−1/2) h_ph S^(1/2) is Hermitian when k
//! solves the Riccati equation. Its orthonormal eigenvectors η_j give
//! ω_j = S^(1/2) η_j, u_j = S^(−1/2) η_j and v_j = −k̄ u_j.
//!
//! The symplectic matrix is M = [[h, −f], [f̄, −hᵀ]] on φ⊥ ⊕ φ⊥; with
//! W = [[δ̂, k], [k̄, δ̂]] one has D W = W M for D = diag(h_ph, −hᵀ − k̄ f).
//!
//! Spectral work happens in coordinates of the φ⊥ basis Q, which is real
//! because the condensate is real. Full-space vectors are Q times the reduced ones.

use crate::csym;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::model::QuadraticModel;
use crate::riccati::{to_reduced, FetterAmplitudes};
use crate::spectral::{Kernel, Symmetry};

/// Residuals of the (u, v) orthogonality and completeness relations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UvReport {
    /// max |u_jᵀ v_j' − v_jᵀ u_j'|
    pub orthogonality_uv: f64,
    /// max |u_j'† u_j − v_j'† v_j − δ_jj'|
    pub orthonormality: f64,
    /// ‖Σ (u_j u_j† − v̄_j v_jᵀ) − δ̂‖₂
    pub completeness: f64,
    /// ‖Σ (u_j v_j† − v̄_j u_jᵀ)‖₂
    pub cross_completeness: f64,
    /// ‖Σ u_j u_j† − (δ̂ − k k̄)⁻¹‖₂
    pub closed_uu: f64,
    /// ‖Σ v̄_j v_jᵀ − k k̄ (δ̂ − k k̄)⁻¹‖₂
    pub closed_vv: f64,
}

impl UvReport {
    pub fn max(&self) -> f64 {
        [
            self.orthogonality_uv,
            self.orthonormality,
            self.completeness,
            self.cross_completeness,
            self.closed_uu,
            self.closed_vv,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Residuals attached to an excitation set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExcitationResiduals {
    /// ‖h_ph ω_j − E_j ω_j‖ (max over j)
    pub eig_omega: f64,
    /// ‖h_ph† u_j − E_j u_j‖ (max over j)
    pub eig_u: f64,
    /// ‖κ − κ†‖₂
    pub kappa_hermiticity: f64,
    /// ‖Σ ω_j u_j† − δ̂‖₂
    pub completeness: f64,
    /// max |u_i† ω_j − δ_ij|
    pub biorthogonality: f64,
    pub uv: UvReport,
}

#[derive(Debug, Clone)]
pub struct ExcitationSet {
    /// Ascending excitation energies E_1 ≤ … ≤ E_{M−1}.
    pub e: Vec<f64>,
    /// Columns are ω_j in the full basis.
    pub omega: CMat,
    pub u: CMat,
    pub v: CMat,
    pub eta: CMat,
    pub residuals: ExcitationResiduals,
}

/// h_ph = h + k f̄ on the full space.
pub fn build_hph(qm: &QuadraticModel, k: &CMat) -> Kernel {
    Kernel::new(&qm.h.mat + k * linalg::conj(&qm.f.mat), Symmetry::General)
}

/// h_ph restricted to φ⊥, in reduced coordinates.
pub fn hph_reduced(qm: &QuadraticModel, k: &CMat) -> CMat {
    let kr = to_reduced(k, qm);
    qm.h_reduced() + &kr * linalg::conj(&qm.f_reduced())
}

/// Eigenvalues of h_ph on φ⊥, sorted by real part; valid for saddle kernels too.
pub fn hph_eigenvalues(qm: &QuadraticModel, k: &CMat) -> Vec<C64> {
    linalg::eigenvalues(&hph_reduced(qm, k))
}

fn max_col_residual(r: &CMat) -> f64 {
    (0..r.ncols()).map(|j| r.column(j).norm()).fold(0.0, f64::max)
}

fn max_entry(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// (δ̂ − k k̄)⁻¹ on φ⊥ extended by zero along φ.
fn s_pinv(qm: &QuadraticModel, k: &CMat) -> Result<CMat> {
    let q = &qm.perp_basis;
    let kr = to_reduced(k, qm);
    let d = kr.nrows();
    let s = CMat::identity(d, d) - &kr * linalg::conj(&kr);
    Ok(q * linalg::inverse(&s)? * q.adjoint())
}

/// Diagonalize κ and build the (ω, u, v) families.
pub fn excitation_spectrum(qm: &QuadraticModel, k: &CMat) -> Result<ExcitationSet> {
    let n = csym::op_norm(k);
    if n >= 1.0 {
        return Err(Error::OutOfDomain { op_norm: n });
    }
    let q = &qm.perp_basis;
    let kr = to_reduced(k, qm);
    let d = kr.nrows();
    let id = CMat::identity(d, d);
    let s = &id - &kr * linalg::conj(&kr);
    let sh = csym::sqrt_psd(&s)?;
    let ish = csym::inv_sqrt_psd(&s)?;
    let hph = hph_reduced(qm, k);
    let kappa = &ish * &hph * &sh;
    let kappa_hermiticity = linalg::frob(&(&kappa - kappa.adjoint()));
    let (e, mut eta) = linalg::herm_eig(&kappa);
    for j in 0..d {
        linalg::fix_phase(&mut eta.column_mut(j));
    }
    let omega_r = &sh * &eta;
    let u_r = &ish * &eta;
    let v_r = -(linalg::conj(&kr) * &u_r);
    let ed = CMat::from_diagonal(&CVec::from_iterator(d, e.iter().map(|&x| c(x))));
    let eig_omega = max_col_residual(&(&hph * &omega_r - &omega_r * &ed));
    let eig_u = max_col_residual(&(hph.adjoint() * &u_r - &u_r * &ed));
    let completeness = linalg::frob(&(&omega_r * u_r.adjoint() - &id));
    let biorthogonality = max_entry(&(u_r.adjoint() * &omega_r - &id));
    let omega = q * omega_r;
    let u = q * u_r;
    let v = linalg::conj(q) * v_r;
    let uv = verify_uv_relations(qm, &u, &v, k)?;
    Ok(ExcitationSet {
        e,
        omega,
        u,
        v,
        eta: q * eta,
        residuals: ExcitationResiduals {
            eig_omega,
            eig_u,
            kappa_hermiticity,
            completeness,
            biorthogonality,
            uv,
        },
    })
}

/// Orthogonality and completeness residuals of the (u_j, v_j) families (columns, full basis).
pub fn verify_uv_relations(qm: &QuadraticModel, u: &CMat, v: &CMat, k: &CMat) -> Result<UvReport> {
    let d = u.ncols();
    let id = CMat::identity(d, d);
    let orthogonality_uv = max_entry(&(u.transpose() * v - v.transpose() * u));
    let orthonormality = max_entry(&(u.adjoint() * u - v.adjoint() * v - id));
    let vb = linalg::conj(v);
    let uu = u * u.adjoint();
    let vv = &vb * v.transpose();
    let completeness = linalg::frob(&(&uu - &vv - &qm.proj.mat));
    let cross_completeness = linalg::frob(&(u * v.adjoint() - &vb * u.transpose()));
    let sinv = s_pinv(qm, k)?;
    let closed_uu = linalg::frob(&(&uu - &sinv));
    let closed_vv = linalg::frob(&(&vv - k * linalg::conj(k) * &sinv));
    Ok(UvReport {
        orthogonality_uv,
        orthonormality,
        completeness,
        cross_completeness,
        closed_uu,
        closed_vv,
    })
}

/// The Fetter block system on φ⊥ ⊕ φ⊥ together with its similarity transform.
#[derive(Debug, Clone)]
pub struct SymplecticSystem {
    /// [[h_⊥ᵀ, −f_⊥], [f̄_⊥, −h_⊥]]
    pub m_mat: CMat,
    /// [[δ̂, k], [k̄, δ̂]]
    pub w_mat: CMat,
    /// Closed-form inverse on φ⊥ ⊕ φ⊥; `None` when ‖k‖_op ≥ 1.
    pub w_inv: Option<CMat>,
    /// diag(h_⊥ᵀ + k f̄_⊥, −h_⊥ − k̄ f_⊥)
    pub d_mat: CMat,
    /// ‖D W − W M‖₂
    pub similarity_residual: f64,
    /// ‖W W⁻¹ − diag(δ̂, δ̂)‖₂, or NaN when W⁻¹ is omitted.
    pub inverse_residual: f64,
    /// M in reduced coordinates (2(M−1) square), with the null directions along φ removed.
    pub m_reduced: CMat,
}

fn blocks(a: &CMat, b: &CMat, c_: &CMat, d: &CMat) -> CMat {
    let m = a.nrows();
    let mut out = CMat::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((0, m), (m, m)).copy_from(b);
    out.view_mut((m, 0), (m, m)).copy_from(c_);
    out.view_mut((m, m), (m, m)).copy_from(d);
    out
}

/// Fetter matrix in reduced coordinates; independent of k.
pub fn fetter_reduced(qm: &QuadraticModel) -> CMat {
    let h = qm.h_reduced();
    let f = qm.f_reduced();
    blocks(&h, &(-&f), &linalg::conj(&f), &(-h.transpose()))
}

pub fn build_symplectic(qm: &QuadraticModel, k: &CMat) -> Result<SymplecticSystem> {
    let m = qm.dim();
    let p = &qm.proj.mat;
    let hp = &qm.h_perp.mat;
    let fp = &qm.f_perp.mat;
    let kb = linalg::conj(k);
    let m_mat = blocks(hp, &(-fp), &linalg::conj(fp), &(-hp.transpose()));
    let w_mat = blocks(p, k, &kb, p);
    let d_mat = blocks(
        &(hp + k * linalg::conj(fp)),
        &CMat::zeros(m, m),
        &CMat::zeros(m, m),
        &(-hp.transpose() - &kb * fp),
    );
    let similarity_residual = linalg::frob(&(&d_mat * &w_mat - &w_mat * &m_mat));
    let (w_inv, inverse_residual) = if csym::op_norm(k) < 1.0 {
        let sinv = s_pinv(qm, k)?;
        // (δ̂ − k̄ k)⁻¹ is the conjugate of (δ̂ − k k̄)⁻¹ since δ̂ is real.
        let sbinv = linalg::conj(&sinv);
        let inv = blocks(&sinv, &(-(k * &sbinv)), &(-(&kb * &sinv)), &sbinv);
        let res = linalg::frob(&(&w_mat * &inv - blocks(p, &CMat::zeros(m, m), &CMat::zeros(m, m), p)));
        (Some(inv), res)
    } else {
        (None, f64::NAN)
    };
    Ok(SymplecticSystem {
        m_mat,
        w_mat,
        w_inv,
        d_mat,
        similarity_residual,
        inverse_residual,
        m_reduced: fetter_reduced(qm),
    })
}

/// ‖[[h, −f], [f̄, −hᵀ]] (φ, φ̄)‖ for the unprojected blocks.
pub fn null_vector_residual(qm: &QuadraticModel) -> f64 {
    let h = &qm.h.mat;
    let f = &qm.f.mat;
    let phib = linalg::conj_vec(&qm.phi);
    let top = h * &qm.phi - f * &phib;
    let bottom = linalg::conj(f) * &qm.phi - h.transpose() * &phib;
    (top.norm_squared() + bottom.norm_squared()).sqrt()
}

/// Solutions of the Fetter eigenproblem on φ⊥ ⊕ φ⊥.
#[derive(Debug, Clone)]
pub struct FetterSolution {
    /// Full spectrum of the reduced matrix, sorted by real part.
    pub spectrum: Vec<C64>,
    /// Positive-branch energies, ascending.
    pub e_plus: Vec<f64>,
    /// Positive-branch amplitudes normalized by ‖u‖² − ‖v‖² = 1, reduced coordinates.
    pub amplitudes: FetterAmplitudes,
    /// The same amplitudes in the full basis.
    pub u: CMat,
    pub v: CMat,
    /// Largest eigen-equation residual after normalization.
    pub residual: f64,
}

fn j_inner(x: &CVec, y: &CVec, d: usize) -> C64 {
    x.rows(0, d).dotc(&y.rows(0, d)) - x.rows(d, d).dotc(&y.rows(d, d))
}

/// General eigensolve of the reduced Fetter matrix, split into ± branches.
pub fn solve_fetter(qm: &QuadraticModel) -> Result<FetterSolution> {
    let mr = fetter_reduced(qm);
    let d = mr.nrows() / 2;
    let (vals, vecs) = linalg::eig(&mr);
    let plus: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].re > 0.0).collect();
    if plus.len() != d {
        return Err(Error::Degeneracy(format!(
            "{} positive-branch eigenvalues, expected {d}",
            plus.len()
        )));
    }
    let mut cols: Vec<CVec> = plus.iter().map(|&i| vecs.column(i).into_owned()).collect();
    let e_plus: Vec<f64> = plus.iter().map(|&i| vals[i].re).collect();
    // J-orthonormalize inside clusters of nearly equal energies.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (e_plus[end] - e_plus[end - 1]).abs() < 1e-9 {
            end += 1;
        }
        for a in start..end {
            for b in start..a {
                let proj = j_inner(&cols[b], &cols[a], d);
                let prev = cols[b].clone();
                cols[a] -= prev * proj;
            }
            let nrm = j_inner(&cols[a], &cols[a], d).re;
            if nrm <= 1e-12 {
                return Err(Error::Degeneracy(format!("non-positive J-norm {nrm:e} on the positive branch")));
            }
            cols[a].unscale_mut(nrm.sqrt());
            linalg::fix_phase(&mut cols[a]);
        }
        start = end;
    }
    let scale = linalg::frob(&mr).max(1.0);
    let mut residual: f64 = 0.0;
    for (x, &e) in cols.iter().zip(&e_plus) {
        residual = residual.max((&mr * x - x * c(e)).norm());
    }
    if residual > 1e-8 * scale {
        return Err(Error::Degeneracy(format!("Fetter eigenvectors defective (residual {residual:e})")));
    }
    let u_r = CMat::from_fn(d, d, |i, j| cols[j][i]);
    let v_r = CMat::from_fn(d, d, |i, j| cols[j][i + d]);
    let q = &qm.perp_basis;
    Ok(FetterSolution {
        spectrum: vals,
        e_plus,
        u: q * &u_r,
        v: linalg::conj(q) * &v_r,
        amplitudes: FetterAmplitudes { u: u_r, v: v_r },
        residual,
    })
}
