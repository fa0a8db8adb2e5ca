//! Dense complex linear-algebra helpers built on nalgebra.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(c)
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn conj_vec(a: &CVec) -> CVec {
    a.map(|z| z.conj())
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5)
}

pub fn symmetric_part(a: &CMat) -> CMat {
    (a + a.transpose()) * c(0.5)
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular matrix".into()))
}

/// Eigen-decomposition of the Hermitian part of `a`, eigenvalues ascending.
pub fn herm_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Real symmetric eigen-decomposition, eigenvalues ascending.
pub fn sym_eig_real(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (vals, vecs)
}

/// Schur factors (Q, T), or `None` for non-finite input or no convergence.
fn schur(a: &CMat) -> Option<(CMat, CMat)> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let n = a.nrows().max(1);
    Schur::try_new(a.clone(), f64::EPSILON, 1000 * n).map(Schur::unpack)
}

/// Eigenvalues of a general complex matrix, sorted by real part then imaginary part.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    if a.is_empty() {
        return Vec::new();
    }
    let Some((_, t)) = schur(a) else {
        return vec![C64::new(f64::NAN, f64::NAN); a.nrows()];
    };
    let mut v: Vec<C64> = (0..a.nrows()).map(|i| t[(i, i)]).collect();
    sort_complex(&mut v);
    v
}

pub fn sort_complex(v: &mut [C64]) {
    v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
}

/// Right eigenpairs of a general complex matrix from its Schur form.
///
/// Eigenvectors are obtained by back substitution on the triangular factor and
/// returned with unit norm; pairs are sorted by real part of the eigenvalue.
pub fn eig(a: &CMat) -> (Vec<C64>, CMat) {
    let n = a.nrows();
    let Some((q, t)) = schur(a) else {
        let nan = C64::new(f64::NAN, f64::NAN);
        return (vec![nan; n], CMat::from_element(n, n, nan));
    };
    let scale = frob(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        x[(k, k)] = c(1.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < small {
                d = c(small);
            }
            x[(i, k)] = -s / d;
        }
    }
    let mut v = q * x;
    for k in 0..n {
        let nrm = v.column(k).norm();
        if nrm > 0.0 {
            v.column_mut(k).unscale_mut(nrm);
        }
    }
    let vals: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        vals[i]
            .re
            .total_cmp(&vals[j].re)
            .then(vals[i].im.total_cmp(&vals[j].im))
    });
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    (sorted_vals, sorted_vecs)
}

/// Orthonormal basis (M × (M−1)) of the orthogonal complement of the unit vector `phi`.
pub fn complement_basis(phi: &CVec) -> CMat {
    let m = phi.len();
    let proj = CMat::identity(m, m) - phi * phi.adjoint();
    let (_, vecs) = herm_eig(&proj);
    let mut q = vecs.columns(1, m - 1).into_owned();
    for k in 0..q.ncols() {
        fix_phase(&mut q.column_mut(k));
    }
    q
}

/// Rotate a vector's global phase so its largest-modulus entry is real positive.
pub fn fix_phase<S>(v: &mut nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_abs + 1e-12 {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs > 0.0 {
        let ph = v[best].conj() / v[best].norm();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

/// Largest elementwise distance after pairing two sorted complex multisets.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    sort_complex(&mut x);
    sort_complex(&mut y);
    x.iter()
        .zip(y.iter())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_input_gives_nan_instead_of_hanging() {
        let mut a = CMat::identity(4, 4);
        a[(1, 2)] = C64::new(f64::INFINITY, 0.0);
        assert!(eigenvalues(&a).iter().all(|z| z.re.is_nan()));
        assert!(eig(&a).1.iter().all(|z| z.re.is_nan()));
    }

    #[test]
    fn eig_reconstructs_general_matrix() {
        let a = CMat::from_fn(6, 6, |i, j| {
            C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.3)
        });
        let (vals, vecs) = eig(&a);
        for k in 0..6 {
            let r = &a * vecs.column(k) - vecs.column(k) * vals[k];
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }

    #[test]
    fn complement_basis_is_orthonormal_and_orthogonal() {
        let mut phi = CVec::from_fn(5, |i, _| c(1.0 + i as f64));
        phi.unscale_mut(phi.norm());
        let q = complement_basis(&phi);
        let gram = q.adjoint() * &q;
        assert!(frob(&(gram - CMat::identity(4, 4))) < 1e-12);
        assert!((q.adjoint() * &phi).norm() < 1e-12);
    }

    #[test]
    fn multiset_distance_ignores_order() {
        let a = [c(1.0), c(3.0), c(2.0)];
        let b = [c(2.0), c(1.0), c(3.0)];
        assert!(multiset_distance(&a, &b) < 1e-15);
    }
}
