//! Takagi factorization of complex-symmetric matrices, PSD square roots and norms.
//!
//! The Takagi modes come from the real symmetric embedding
//! [[Re K, Im K], [Im K, −Re K]]: an eigenvector (a; b) with eigenvalue s ≥ 0
//! gives u = a + ib with K ū = s u. Any orthonormal basis of a degenerate
//! eigenspace works, so clusters need no special treatment.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};

/// K = Σ_j z_j e_j e_jᵀ with orthonormal e_j.
#[derive(Debug, Clone)]
pub struct TakagiDecomposition {
    /// All M modes ordered by |z| descending; the trailing `dim − rank` have z = 0.
    pub modes: Vec<(CVec, C64)>,
    pub rank: usize,
}

impl TakagiDecomposition {
    pub fn reconstruct(&self) -> CMat {
        let m = self.modes.first().map_or(0, |(e, _)| e.len());
        let mut k = CMat::zeros(m, m);
        for (e, z) in &self.modes {
            k += e * e.transpose() * *z;
        }
        k
    }

    /// Matrix whose columns are the e_j.
    pub fn frame(&self) -> CMat {
        let m = self.modes.first().map_or(0, |(e, _)| e.len());
        CMat::from_fn(m, self.modes.len(), |i, j| self.modes[j].0[i])
    }
}

/// Takagi factorization of a complex-symmetric K.
pub fn takagi(k: &CMat, tol: f64) -> Result<TakagiDecomposition> {
    let m = k.nrows();
    if k.ncols() != m {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", m, k.ncols())));
    }
    let asym = linalg::frob(&(k - k.transpose()));
    if asym >= 1e-10 {
        return Err(Error::InvalidInput(format!("kernel not symmetric (residual {asym:e})")));
    }
    let k = linalg::symmetric_part(k);
    let x = k.map(|z| z.re);
    let y = k.map(|z| z.im);
    let mut emb = DMatrix::<f64>::zeros(2 * m, 2 * m);
    emb.view_mut((0, 0), (m, m)).copy_from(&x);
    emb.view_mut((0, m), (m, m)).copy_from(&y);
    emb.view_mut((m, 0), (m, m)).copy_from(&y);
    emb.view_mut((m, m), (m, m)).copy_from(&(-&x));
    let (vals, vecs) = linalg::sym_eig_real(&emb);
    let scale = linalg::frob(&k).max(1.0);
    let cut = 1e-13 * scale;
    let mut modes: Vec<(CVec, C64)> = Vec::with_capacity(m);
    for idx in (m..2 * m).rev() {
        if vals[idx] <= cut {
            break;
        }
        let mut e = CVec::from_fn(m, |i, _| C64::new(vecs[(i, idx)], vecs[(i + m, idx)]));
        e.unscale_mut(e.norm());
        linalg::fix_phase(&mut e);
        let z = e.dotc(&(&k * linalg::conj_vec(&e)));
        modes.push((e, z));
    }
    let rank = modes.len();
    if rank < m {
        // Null space: orthonormal complement of the found modes.
        let mut p = CMat::identity(m, m);
        for (e, _) in &modes {
            p -= e * e.adjoint();
        }
        let (pv, pvec) = linalg::herm_eig(&p);
        for j in (0..m).rev().take(m - rank) {
            debug_assert!(pv[j] > 0.5);
            let mut e = pvec.column(j).into_owned();
            linalg::fix_phase(&mut e);
            modes.push((e, c(0.0)));
        }
    }
    let out = TakagiDecomposition { modes, rank };
    let res = linalg::frob(&(out.reconstruct() - &k));
    if res >= tol.max(1e-10 * scale) {
        return Err(Error::Degeneracy(format!("Takagi reconstruction residual {res:e}")));
    }
    Ok(out)
}

fn psd_parts(a: &CMat, floor: f64) -> Result<(Vec<f64>, CMat)> {
    let (vals, vecs) = linalg::herm_eig(a);
    if let Some(&lo) = vals.first() {
        if lo < floor {
            return Err(Error::Domain(format!("matrix not positive (λ_min = {lo:e})")));
        }
    }
    Ok((vals, vecs))
}

fn spectral_fn(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v)))));
    vecs * d * vecs.adjoint()
}

/// Hermitian PSD square root; eigenvalues down to −1e-12 are clamped to 0.
pub fn sqrt_psd(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = psd_parts(a, -1e-12)?;
    Ok(spectral_fn(&vals, &vecs, |v| v.max(0.0).sqrt()))
}

/// Inverse square root of a Hermitian positive-definite matrix.
pub fn inv_sqrt_psd(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = psd_parts(a, 1e-10)?;
    Ok(spectral_fn(&vals, &vecs, |v| 1.0 / v.sqrt()))
}

pub fn op_norm(k: &CMat) -> f64 {
    linalg::spectral_norm(k)
}

pub fn hs_norm(k: &CMat) -> f64 {
    linalg::frob(k)
}
