//! Exact many-body linear algebra on small truncated Fock spaces.
//!
//! Mode 0 is the condensate; modes 1..m−1 span a subspace of φ⊥. States are
//! occupation tuples and operators are assembled as dense matrices from
//! normal-ordered monomials a†…a† a…a.
//!
//! For the phonon Hamiltonian the noncondensate modes are taken in the
//! biorthogonal frame b_j† = a†(ω_j), c_j = a(u_j). In that frame
//! h_ph(a†, a) = Σ E_j b_j† c_j and f̄(a, a) = Σ F̃_ij c_i c_j with F̃ = ωᵀ f̄ ω,
//! and the span of the first m−1 modes is invariant.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::csym;
use crate::error::{Error, Result};
use crate::excitations::{excitation_spectrum, solve_fetter, ExcitationSet};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::model::QuadraticModel;
use crate::riccati::{newton_polish, to_full, to_reduced};

/// Largest Fock dimension accepted.
pub const DIM_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Fixed particle number N.
    Sector(usize),
    /// All states with total occupation ≤ cap.
    Capped(usize),
}

/// Occupation-number basis of a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockSector {
    pub m: usize,
    pub kind: SpaceKind,
    pub states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

/// A normal-ordered monomial coeff · a†_{cre[0]} a†_{cre[1]} … a_{ann[0]} a_{ann[1]} ….
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: C64,
    pub cre: Vec<usize>,
    pub ann: Vec<usize>,
}

impl Term {
    pub fn new(coeff: C64, cre: &[usize], ann: &[usize]) -> Self {
        Self {
            coeff,
            cre: cre.to_vec(),
            ann: ann.to_vec(),
        }
    }
}

/// Dense many-body operator on a Fock space.
#[derive(Debug, Clone)]
pub struct ManyBodyOperator {
    pub mat: CMat,
    pub conserves_n: bool,
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

fn enumerate(m: usize, total: usize, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    if prefix.len() == m - 1 {
        prefix.push(total as u16);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for n in 0..=total {
        prefix.push(n as u16);
        enumerate(m, total - n, prefix, out);
        prefix.pop();
    }
}

fn sector_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<FockSector>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<FockSector>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl FockSector {
    fn from_states(m: usize, kind: SpaceKind, states: Vec<Vec<u16>>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { m, kind, states, index }
    }

    /// Sector 𝔽_N of m modes in lexicographic order.
    pub fn enumerate_sector(m: usize, n: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 modes, got {m}")));
        }
        let dim = binomial(n + m - 1, m - 1).unwrap_or(usize::MAX);
        if dim > DIM_CAP {
            return Err(Error::SizeCap { dim, cap: DIM_CAP });
        }
        let mut states = Vec::with_capacity(dim);
        enumerate(m, n, &mut Vec::with_capacity(m), &mut states);
        states.sort();
        Ok(Self::from_states(m, SpaceKind::Sector(n), states))
    }

    /// Shared, memoized copy of a sector.
    pub fn sector_cached(m: usize, n: usize) -> Result<Arc<Self>> {
        let mut cache = sector_cache().lock().expect("sector cache poisoned");
        if let Some(s) = cache.get(&(m, n)) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(Self::enumerate_sector(m, n)?);
        cache.insert((m, n), Arc::clone(&s));
        Ok(s)
    }

    /// All states of m modes with total occupation ≤ cap, ordered by total then lexicographically.
    pub fn capped(m: usize, cap: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidInput("need at least 1 mode".into()));
        }
        let dim = binomial(cap + m, m).unwrap_or(usize::MAX);
        if dim > DIM_CAP {
            return Err(Error::SizeCap { dim, cap: DIM_CAP });
        }
        let mut states = Vec::with_capacity(dim);
        for total in 0..=cap {
            let mut level = Vec::new();
            if m == 1 {
                level.push(vec![total as u16]);
            } else {
                enumerate(m, total, &mut Vec::with_capacity(m), &mut level);
            }
            level.sort();
            states.extend(level);
        }
        Ok(Self::from_states(m, SpaceKind::Capped(cap), states))
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: &[u16]) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn total(&self, i: usize) -> usize {
        self.states[i].iter().map(|&x| x as usize).sum()
    }

    /// Apply a monomial to basis state `i`; `None` if it vanishes or leaves the space.
    fn apply(&self, term: &Term, i: usize) -> Option<(usize, f64)> {
        let mut s = self.states[i].clone();
        let mut amp = 1.0;
        for &a in term.ann.iter().rev() {
            if s[a] == 0 {
                return None;
            }
            amp *= (s[a] as f64).sqrt();
            s[a] -= 1;
        }
        for &a in term.cre.iter().rev() {
            s[a] += 1;
            amp *= (s[a] as f64).sqrt();
        }
        self.index_of(&s).map(|j| (j, amp))
    }

    /// Dense matrix of a sum of monomials.
    pub fn operator(&self, terms: &[Term]) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for term in terms {
            if term.coeff == c(0.0) {
                continue;
            }
            for i in 0..d {
                if let Some((j, amp)) = self.apply(term, i) {
                    out[(j, i)] += term.coeff * amp;
                }
            }
        }
        out
    }

    pub fn annihilator(&self, mode: usize) -> CMat {
        self.operator(&[Term::new(c(1.0), &[], &[mode])])
    }

    pub fn creator(&self, mode: usize) -> CMat {
        self.operator(&[Term::new(c(1.0), &[mode], &[])])
    }

    pub fn number(&self, mode: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.dim(),
            self.states.iter().map(|s| c(s[mode] as f64)),
        ))
    }

    /// Diagonal projector onto states with the given total occupation.
    pub fn total_projector(&self, total: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| c(if self.total(i) == total { 1.0 } else { 0.0 })),
        ))
    }

    /// Norm of the entries coupling states of different total occupation.
    pub fn block_offdiag_norm(&self, mat: &CMat) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                if self.total(i) != self.total(j) {
                    acc += mat[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    /// max ‖([a_i, a_j†] − δ_ij) e_s‖ over states s with total ≤ interior.
    pub fn ccr_residual(&self, interior: usize) -> f64 {
        let a: Vec<CMat> = (0..self.m).map(|i| self.annihilator(i)).collect();
        let ad: Vec<CMat> = (0..self.m).map(|i| self.creator(i)).collect();
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                let mut comm = &a[i] * &ad[j] - &ad[j] * &a[i];
                if i == j {
                    comm -= CMat::identity(d, d);
                }
                for s in 0..d {
                    if self.total(s) <= interior {
                        worst = worst.max(comm.column(s).norm());
                    }
                }
            }
        }
        worst
    }
}

/// Quadratic form Σ_ij A_ij a_{i+1}† a_{j+1} over the noncondensate modes.
fn one_body_terms(a: &CMat) -> Vec<Term> {
    let mut out = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(Term::new(a[(i, j)], &[i + 1], &[j + 1]));
        }
    }
    out
}

/// H_ph = Σ A_ij a_i† a_j + (1/N) a_0†² Σ F_ij a_i a_j over modes 1..m−1.
pub fn build_hph_fock(sector: &FockSector, hph_block: &CMat, fbar_block: &CMat, n: f64) -> Result<ManyBodyOperator> {
    let k = sector.m - 1;
    if hph_block.shape() != (k, k) || fbar_block.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "blocks {:?} and {:?} for {} noncondensate modes",
            hph_block.shape(),
            fbar_block.shape(),
            k
        )));
    }
    let mut terms = one_body_terms(hph_block);
    for i in 0..k {
        for j in 0..k {
            terms.push(Term::new(fbar_block[(i, j)] / n, &[0, 0], &[i + 1, j + 1]));
        }
    }
    Ok(ManyBodyOperator {
        mat: sector.operator(&terms),
        conserves_n: true,
    })
}

/// Lowest m−1 excitation energies and F̃_ij = ω_iᵀ f̄ ω_j.
pub fn phonon_blocks(qm: &QuadraticModel, ex: &ExcitationSet, m: usize) -> Result<(Vec<f64>, CMat)> {
    let k = m - 1;
    if k > ex.e.len() {
        return Err(Error::InvalidIndex { index: k, len: ex.e.len() });
    }
    let w = ex.omega.columns(0, k).into_owned();
    let ft = w.transpose() * linalg::conj(&qm.f.mat) * &w;
    Ok((ex.e[..k].to_vec(), linalg::symmetric_part(&ft)))
}

fn diag_block(e: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(e.len(), e.iter().map(|&x| c(x))))
}

/// Σ_{j≥1} n_j E_j for every state of the sector, sorted.
pub fn combinatorial_sums(sector: &FockSector, e: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = sector
        .states
        .iter()
        .map(|s| s[1..].iter().zip(e).map(|(&n, &x)| n as f64 * x).sum())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub m: usize,
    pub n: usize,
    pub dim: usize,
    /// Largest deviation between sorted dense eigenvalues and sorted combinatorial sums.
    pub max_deviation: f64,
    pub max_imag: f64,
    /// Largest relative residual over constructed eigenvectors of every admissible selection.
    pub max_eigenvector_residual: f64,
}

impl Theorem2Report {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation < tol && self.max_eigenvector_residual < tol
    }
}

/// Dense spectrum of H_ph on 𝔽_N against combinatorial sums, plus eigenvector construction.
pub fn theorem2_check(m: usize, n: usize, e: &[f64], ftilde: &CMat) -> Result<Theorem2Report> {
    let sector = FockSector::sector_cached(m, n)?;
    let h = build_hph_fock(&sector, &diag_block(e), ftilde, n as f64)?;
    let ev = linalg::eigenvalues(&h.mat);
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    let max_imag = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let want = combinatorial_sums(&sector, e);
    let max_deviation = re.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut max_eigenvector_residual: f64 = 0.0;
    for s in &sector.states {
        let mut selection = Vec::new();
        for (j, &cnt) in s.iter().enumerate().skip(1) {
            selection.extend(std::iter::repeat_n(j, cnt as usize));
        }
        let built = construct_eigenvector(&sector, e, ftilde, &selection)?;
        max_eigenvector_residual = max_eigenvector_residual.max(built.residual);
    }
    Ok(Theorem2Report {
        m,
        n,
        dim: sector.dim(),
        max_deviation,
        max_imag,
        max_eigenvector_residual,
    })
}

#[derive(Debug, Clone)]
pub struct ConstructedEigenvector {
    pub psi: CVec,
    pub energy: f64,
    /// ‖H_ph Ψ − E Ψ‖ / ‖Ψ‖
    pub residual: f64,
}

/// Build the eigenvector of H_ph whose top component is the occupation state of `selection`.
///
/// With H_ph = D + U, D = Σ E_j n_j and U the pair-lowering part, the component at
/// excitation level L solves (E − D) ψ_L = U ψ_{L+2}. The ladder matrices carry the
/// exact combinatorial factors, including √((N−n+1)(N−n+2))/N from a_0†².
pub fn construct_eigenvector(sector: &FockSector, e: &[f64], ftilde: &CMat, selection: &[usize]) -> Result<ConstructedEigenvector> {
    let n = match sector.kind {
        SpaceKind::Sector(n) => n,
        SpaceKind::Capped(_) => return Err(Error::InvalidInput("eigenvector construction needs a fixed-N sector".into())),
    };
    let k = sector.m - 1;
    if selection.len() > n {
        return Err(Error::InvalidInput(format!("selection of {} modes exceeds N = {n}", selection.len())));
    }
    let mut top = vec![0u16; sector.m];
    for &j in selection {
        if j == 0 || j > k {
            return Err(Error::InvalidIndex { index: j, len: k + 1 });
        }
        top[j] += 1;
    }
    top[0] = (n - selection.len()) as u16;
    let energy: f64 = selection.iter().map(|&j| e[j - 1]).sum();
    let d = sector.dim();
    let diag: Vec<f64> = sector
        .states
        .iter()
        .map(|s| s[1..].iter().zip(e).map(|(&c_, &x)| c_ as f64 * x).sum())
        .collect();
    let mut lower_terms = Vec::new();
    for i in 0..k {
        for j in 0..k {
            lower_terms.push(Term::new(ftilde[(i, j)] / n as f64, &[0, 0], &[i + 1, j + 1]));
        }
    }
    let u = sector.operator(&lower_terms);
    let level = |i: usize| n - sector.states[i][0] as usize;
    let top_idx = sector.index_of(&top).expect("top state lies in the sector");
    let mut psi = CVec::zeros(d);
    psi[top_idx] = c(1.0);
    let mut current = psi.clone();
    let mut lvl = selection.len();
    while lvl >= 2 {
        lvl -= 2;
        let rhs = &u * &current;
        let mut next = CVec::zeros(d);
        for i in 0..d {
            if level(i) != lvl || rhs[i] == c(0.0) {
                continue;
            }
            let den = energy - diag[i];
            if den.abs() <= 1e-10 {
                return Err(Error::Resonance { denominator: den });
            }
            next[i] = rhs[i] / den;
        }
        psi += &next;
        current = next;
    }
    let h = build_hph_fock(sector, &diag_block(e), ftilde, n as f64)?;
    let residual = (&h.mat * &psi - &psi * c(energy)).norm() / psi.norm();
    Ok(ConstructedEigenvector { psi, energy, residual })
}

/// ⟨Ψ|𝒩_⊥^l|Ψ⟩ / (N^l ‖Ψ‖²) on a fixed-N sector.
pub fn depletion_diagnostic(sector: &FockSector, psi: &CVec, l: u32) -> f64 {
    let n = match sector.kind {
        SpaceKind::Sector(n) | SpaceKind::Capped(n) => n as f64,
    };
    let mut num = 0.0;
    for (i, s) in sector.states.iter().enumerate() {
        let perp: f64 = s[1..].iter().map(|&x| x as f64).sum();
        num += psi[i].norm_sqr() * perp.powi(l as i32);
    }
    num / (n.powi(l as i32) * psi.norm_squared())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorReport {
    /// ‖Σ_n a_0†^{N−n} P_n(𝒩_φ) a_0^{N−n}/(N−n)! − I‖ on 𝔽_N.
    pub resolution: f64,
    /// ‖(−1)^N Σ_n … − Σ_n (−1)^{N−n}/((N−n)! n!) Π_{p≠N−n}(𝒩_φ − p)‖ on 𝔽_N.
    pub signed_factorization: f64,
    /// ‖(−1)^N Σ_n … − I‖ on 𝔽_N; equals 0 for even N and 2√dim for odd N.
    pub signed_vs_identity: f64,
    /// max_{m,n} ‖𝒰_m 𝒰_n* − δ_mn 𝒫_{n,n}‖ on 𝔽_n.
    pub u_products: f64,
    /// max_n ‖𝒩_φ Π_n − (N−n) Π_n‖ with Π_n = 𝒰_n* 𝒰_n.
    pub number_structure: f64,
    /// max_n ‖Π_n² − Π_n‖.
    pub idempotence: f64,
}

impl ProjectorReport {
    /// Largest residual among the identities that hold exactly.
    pub fn max(&self) -> f64 {
        [
            self.resolution,
            self.signed_factorization,
            self.u_products,
            self.number_structure,
            self.idempotence,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

fn diag_poly(nphi: &[f64], f: impl Fn(f64) -> f64) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(nphi.len(), nphi.iter().map(|&x| c(f(x)))))
}

/// P_n(x) = ((−1)^n / n!) Π_{j=1..n} (x − j).
pub fn p_poly(n: usize, x: f64) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign / factorial(n) * (1..=n).map(|j| x - j as f64).product::<f64>()
}

fn mat_pow(a: &CMat, p: usize) -> CMat {
    let mut out = CMat::identity(a.nrows(), a.ncols());
    for _ in 0..p {
        out = &out * a;
    }
    out
}

/// Residuals of the condensate-number projector identities on 𝔽_N with m modes.
pub fn verify_projector_lemmas(m: usize, n: usize) -> Result<ProjectorReport> {
    let space = FockSector::capped(m, n)?;
    let d = space.dim();
    let nphi: Vec<f64> = space.states.iter().map(|s| s[0] as f64).collect();
    let a0 = space.annihilator(0);
    let a0d = space.creator(0);
    let s_n = space.total_projector(n);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut sum = CMat::zeros(d, d);
    let mut lagrange = CMat::zeros(d, d);
    let mut u_ops = Vec::with_capacity(n + 1);
    let mut u_star = Vec::with_capacity(n + 1);
    for level in 0..=n {
        let p = n - level;
        let pn = diag_poly(&nphi, |x| p_poly(level, x));
        let lowered = mat_pow(&a0, p);
        let raised = mat_pow(&a0d, p);
        let scale = 1.0 / factorial(p).sqrt();
        sum += &raised * &pn * &lowered * c(1.0 / factorial(p));
        let coef = if p % 2 == 0 { 1.0 } else { -1.0 } / (factorial(p) * factorial(level));
        lagrange += diag_poly(&nphi, |x| {
            coef * (0..=n)
                .filter(|&q| q != p)
                .map(|q| x - q as f64)
                .product::<f64>()
        });
        let s_level = space.total_projector(level);
        u_ops.push(&pn * &lowered * &s_n * c(scale));
        u_star.push(&raised * &pn * &s_level * c(scale));
    }
    let id_n = &s_n;
    let resolution = linalg::frob(&(&s_n * &sum * &s_n - id_n));
    let signed = &sum * c(sign);
    let signed_factorization = linalg::frob(&(&s_n * (&signed - &lagrange) * &s_n));
    let signed_vs_identity = linalg::frob(&(&s_n * &signed * &s_n - id_n));
    let mut u_products: f64 = 0.0;
    for (mi, um) in u_ops.iter().enumerate() {
        for (ni, us) in u_star.iter().enumerate() {
            let prod = um * us;
            let want = if mi == ni {
                diag_poly(&nphi, |x| p_poly(ni, x)) * space.total_projector(ni)
            } else {
                CMat::zeros(d, d)
            };
            u_products = u_products.max(linalg::frob(&(prod - want)));
        }
    }
    let nphi_op = diag_poly(&nphi, |x| x);
    let mut number_structure: f64 = 0.0;
    let mut idempotence: f64 = 0.0;
    for level in 0..=n {
        let pi = &u_star[level] * &u_ops[level];
        number_structure = number_structure.max(linalg::frob(&(&nphi_op * &pi - &pi * c((n - level) as f64))));
        idempotence = idempotence.max(linalg::frob(&(&pi * &pi - &pi)));
    }
    Ok(ProjectorReport {
        resolution,
        signed_factorization,
        signed_vs_identity,
        u_products,
        number_structure,
        idempotence,
    })
}

/// Model restricted to span{φ, η_1, …, η_{m−1}} with its Riccati kernel.
struct CompressedModel {
    qm: QuadraticModel,
    /// Pair kernel of the compressed model in mode coordinates (m × m, row/column 0 zero).
    k: CMat,
}

fn compressed(qm: &QuadraticModel, k: &CMat, ex: &ExcitationSet, m: usize) -> Result<CompressedModel> {
    if m < 2 || m - 1 > ex.e.len() {
        return Err(Error::InvalidIndex { index: m, len: ex.e.len() + 1 });
    }
    let dim = qm.dim();
    let mut b = CMat::zeros(dim, m);
    b.set_column(0, &qm.phi);
    for j in 1..m {
        b.set_column(j, &ex.eta.column(j - 1));
    }
    let qc = qm.compress(&b)?;
    let kc = b.adjoint() * k * linalg::conj(&b);
    let kr = to_reduced(&kc, &qc);
    let (kr, _, _) = newton_polish(&qc.h_reduced(), &qc.f_reduced(), &kr, 1e-12, 50)?;
    let k = to_full(&kr, &qc);
    Ok(CompressedModel { qm: qc, k })
}

fn block_perp(a: &CMat) -> CMat {
    let m = a.nrows();
    a.view((1, 1), (m - 1, m - 1)).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugationRow {
    pub n: usize,
    pub dim: usize,
    /// ‖Δ_exact − Δ_quad‖₂ / ‖Δ_quad‖₂ over the lowest levels, shifted by their ground values.
    pub deviation: f64,
    /// ‖𝒲^{⌊N/2⌋+1}‖, exactly zero for a nilpotent 𝒲.
    pub nilpotency: f64,
    /// ‖e^𝒲 e^{−𝒲} − I‖
    pub inverse_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationReport {
    pub m: usize,
    pub levels: usize,
    pub rows: Vec<ConjugationRow>,
    /// deviation(N_i) / deviation(N_{i+1}) for successive entries.
    pub ratios: Vec<f64>,
}

fn exp_nilpotent(w: &CMat, order: usize) -> CMat {
    let d = w.nrows();
    let mut out = CMat::identity(d, d);
    let mut term = CMat::identity(d, d);
    for p in 1..=order {
        term = &term * w * c(1.0 / p as f64);
        out += &term;
    }
    out
}

fn lowest_gaps(mut v: Vec<f64>, count: usize) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let g = v[0];
    v.iter().take(count).map(|x| x - g).collect()
}

/// Exact e^𝒲 conjugation of H_app against the quadratic transformed Hamiltonian.
pub fn conjugation_scaling_check(qm: &QuadraticModel, k: &CMat, ex: &ExcitationSet, m: usize, n_list: &[usize]) -> Result<ConjugationReport> {
    let levels = 10;
    let cm = compressed(qm, k, ex, m)?;
    let h = block_perp(&cm.qm.h_perp.mat);
    let f = block_perp(&cm.qm.f_perp.mat);
    let kp = block_perp(&cm.k);
    let hph = block_perp(&(&cm.qm.h.mat + &cm.k * linalg::conj(&cm.qm.f.mat)));
    let fb = linalg::conj(&f);
    let q = m - 1;
    let mut rows = Vec::new();
    for &n in n_list {
        let sector = FockSector::sector_cached(m, n)?;
        let nf = n as f64;
        let mut app = one_body_terms(&h);
        let mut w_terms = Vec::new();
        let mut quad = one_body_terms(&hph);
        for i in 0..q {
            for j in 0..q {
                app.push(Term::new(f[(i, j)] / (2.0 * nf), &[i + 1, j + 1], &[0, 0]));
                app.push(Term::new(fb[(i, j)] / (2.0 * nf), &[0, 0], &[i + 1, j + 1]));
                w_terms.push(Term::new(-kp[(i, j)] / (2.0 * nf), &[i + 1, j + 1], &[0, 0]));
                quad.push(Term::new(fb[(i, j)] / nf, &[0, 0], &[i + 1, j + 1]));
            }
        }
        let h_app = sector.operator(&app);
        let w = sector.operator(&w_terms);
        let order = n / 2;
        let nilpotency = linalg::frob(&mat_pow(&w, order + 1));
        let ew = exp_nilpotent(&w, order);
        let emw = exp_nilpotent(&(-&w), order);
        let d = sector.dim();
        let inverse_residual = linalg::frob(&(&ew * &emw - CMat::identity(d, d)));
        let conj_h = &ew * &h_app * &emw;
        let exact: Vec<f64> = linalg::eigenvalues(&conj_h).iter().map(|z| z.re).collect();
        let approx: Vec<f64> = linalg::eigenvalues(&sector.operator(&quad)).iter().map(|z| z.re).collect();
        let count = levels.min(d);
        let de = lowest_gaps(exact, count);
        let dq = lowest_gaps(approx, count);
        let diff: f64 = de.iter().zip(&dq).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = dq.iter().map(|x| x * x).sum::<f64>().sqrt();
        let deviation = if diff == 0.0 { 0.0 } else { diff / scale };
        rows.push(ConjugationRow {
            n,
            dim: d,
            deviation,
            nilpotency,
            inverse_residual,
        });
    }
    let ratios = rows.windows(2).map(|w| w[0].deviation / w[1].deviation).collect();
    Ok(ConjugationReport { m, levels, rows, ratios })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovReport {
    pub m: usize,
    pub n_cap: usize,
    /// Lowest excitation gaps of H_Bog on the capped space.
    pub gaps: Vec<f64>,
    /// Matching sums of restricted Fetter energies.
    pub expected: Vec<f64>,
    pub max_deviation: f64,
    /// |gap_1 − E_1| / E_1 against the full-model E_1.
    pub lowest_gap_rel_error: f64,
    /// max ‖([γ_i, γ_j†] − δ_ij) e_s‖ on interior states.
    pub ccr_residual: f64,
    /// max ‖[γ_i, γ_j] e_s‖ on interior states.
    pub ccr_anomalous: f64,
}

/// Spectrum of h(a†,a) + ½f(a†,a†) + ½f̄(a,a) on a capped space of the noncondensate modes.
pub fn bogoliubov_gap_check(qm: &QuadraticModel, k: &CMat, ex: &ExcitationSet, m: usize, n_cap: usize) -> Result<BogoliubovReport> {
    let count = 4;
    let cm = compressed(qm, k, ex, m)?;
    let q = m - 1;
    let h = block_perp(&cm.qm.h_perp.mat);
    let f = block_perp(&cm.qm.f_perp.mat);
    let fb = linalg::conj(&f);
    // Modes of the capped space are 0..q−1; shift the one-body helper's indices down by one.
    let space = FockSector::capped(q, n_cap)?;
    let mut terms = Vec::new();
    for i in 0..q {
        for j in 0..q {
            terms.push(Term::new(h[(i, j)], &[i], &[j]));
            terms.push(Term::new(f[(i, j)] * 0.5, &[i, j], &[]));
            terms.push(Term::new(fb[(i, j)] * 0.5, &[], &[i, j]));
        }
    }
    let hb = space.operator(&terms);
    let (vals, _) = linalg::herm_eig(&hb);
    let fs = solve_fetter(&cm.qm)?;
    let er = &fs.e_plus;
    let mut sums = Vec::new();
    for i in 0..q {
        sums.push(er[i]);
        for j in i..q {
            sums.push(er[i] + er[j]);
        }
        for j in i..q {
            for l in j..q {
                sums.push(er[i] + er[j] + er[l]);
            }
        }
    }
    sums.sort_by(f64::total_cmp);
    let expected: Vec<f64> = sums.into_iter().take(count).collect();
    let gaps: Vec<f64> = vals.iter().skip(1).take(count).map(|v| v - vals[0]).collect();
    let max_deviation = gaps.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lowest_gap_rel_error = (gaps[0] - ex.e[0]).abs() / ex.e[0];
    // γ_j = Σ_x (ū_j(x) a_x + v̄_j(x) a_x†) from the restricted amplitudes in mode coordinates.
    let u = block_rows(&fs.u);
    let v = block_rows(&fs.v);
    let a: Vec<CMat> = (0..q).map(|i| space.annihilator(i)).collect();
    let ad: Vec<CMat> = (0..q).map(|i| space.creator(i)).collect();
    let d = space.dim();
    let gamma: Vec<CMat> = (0..q)
        .map(|j| {
            let mut g = CMat::zeros(d, d);
            for x in 0..q {
                g += &a[x] * u[(x, j)].conj() + &ad[x] * v[(x, j)].conj();
            }
            g
        })
        .collect();
    let interior = n_cap.saturating_sub(2);
    let mut ccr_residual: f64 = 0.0;
    let mut ccr_anomalous: f64 = 0.0;
    for i in 0..q {
        for j in 0..q {
            let gd = gamma[j].adjoint();
            let mut comm = &gamma[i] * &gd - &gd * &gamma[i];
            if i == j {
                comm -= CMat::identity(d, d);
            }
            let anom = &gamma[i] * &gamma[j] - &gamma[j] * &gamma[i];
            for s in 0..d {
                if space.total(s) <= interior {
                    ccr_residual = ccr_residual.max(comm.column(s).norm());
                    ccr_anomalous = ccr_anomalous.max(anom.column(s).norm());
                }
            }
        }
    }
    Ok(BogoliubovReport {
        m,
        n_cap,
        gaps,
        expected,
        max_deviation,
        lowest_gap_rel_error,
        ccr_residual,
        ccr_anomalous,
    })
}

fn block_rows(a: &CMat) -> CMat {
    a.rows(1, a.nrows() - 1).into_owned()
}

/// Fock eigenvalue check for a solved kernel: excitation set plus (E, F̃) for m modes.
pub fn theorem2_from_model(qm: &QuadraticModel, k: &CMat, m: usize, n: usize) -> Result<Theorem2Report> {
    if csym::op_norm(k) >= 1.0 {
        return Err(Error::OutOfDomain { op_norm: csym::op_norm(k) });
    }
    let ex = excitation_spectrum(qm, k)?;
    let (e, ft) = phonon_blocks(qm, &ex, m)?;
    theorem2_check(m, n, &e, &ft)
}
