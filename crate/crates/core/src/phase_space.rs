//! Doubled one-particle phase space, covariance maps and one-particle modular data.
//!
//! A noise vector `f` lives in `C^{bins*d}` (a step function with one `C^d` value
//! per time bin). The doubled space stores, bin after bin, the pair
//! `(f_b, -conj f_b)` produced by `iota`, so bin `b` occupies coordinates
//! `b*2d .. (b+1)*2d`. Conjugation is entrywise in the standard basis.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{
    block2, block_diag, c, complexify, conj_mat, conj_vec, flip, hermitian_defect,
    hermitian_eigenvalues, hermitian_fn, psd_sqrt, random_cvec, rank_real, realify,
    unitary_defect, CMat, CVec, RMat,
};

/// Singular-value threshold for ranks and intersections of real subspaces.
pub const RANK_TOL: f64 = 1e-9;
/// Default tolerance for the symplecticity and duality checks.
pub const SYMPLECTIC_TOL: f64 = 1e-11;

const STRUCTURE_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseSpaceError {
    #[error("bin {bin}: T is not Hermitian (defect {defect:.3e})")]
    NotHermitian { bin: usize, defect: f64 },
    #[error("bin {bin}: T not injective (smallest eigenvalue {min_eig:.3e})")]
    NotInjective { bin: usize, min_eig: f64 },
    #[error("bin {bin}: T has negative spectrum (smallest eigenvalue {min_eig:.3e})")]
    NegativeSpectrum { bin: usize, min_eig: f64 },
    #[error("bin {bin}: squeezing condition failed: {condition}")]
    Squeezing { bin: usize, condition: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bin {bin}: covariance block is singular")]
    Singular { bin: usize },
    #[error("map is not block diagonal over time bins (off-block mass {mass:.3e})")]
    NotBlockDiagonal { mass: f64 },
    #[error("polar decomposition failed: s*s has eigenvalue {min_eig:.3e}")]
    NonPositive { min_eig: f64 },
}

pub type Result<T> = std::result::Result<T, PhaseSpaceError>;

/// Noise multiplicity `d` and number of time bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSpaceModel {
    pub d: usize,
    pub bins: usize,
}

impl PhaseSpaceModel {
    pub fn new(d: usize, bins: usize) -> Self {
        assert!(d > 0 && bins > 0, "multiplicity and bin count must be positive");
        Self { d, bins }
    }

    /// Per-bin doubled dimension `2d`.
    pub fn doubled_dim(&self) -> usize {
        2 * self.d
    }

    /// Total doubled dimension `bins * 2d`.
    pub fn total_dim(&self) -> usize {
        self.bins * self.doubled_dim()
    }

    /// Dimension of the undoubled noise space `bins * d`.
    pub fn noise_dim(&self) -> usize {
        self.bins * self.d
    }

    /// Doubling map applied bin by bin.
    pub fn iota(&self, f: &CVec) -> CVec {
        assert_eq!(f.len(), self.noise_dim());
        let d = self.d;
        let mut out = CVec::zeros(self.total_dim());
        for b in 0..self.bins {
            for a in 0..d {
                let z = f[b * d + a];
                out[b * 2 * d + a] = z;
                out[b * 2 * d + d + a] = -z.conj();
            }
        }
        out
    }

    /// Restriction of a noise vector to the first `upto` bins.
    pub fn prefix(&self, f: &CVec, upto: usize) -> CVec {
        let mut g = f.clone();
        for i in (upto.min(self.bins) * self.d)..g.len() {
            g[i] = c(0.0, 0.0);
        }
        g
    }

    /// The conjugate-linear flip `K^pi` on the whole doubled space.
    pub fn k_pi(&self) -> ConjLinearMap {
        ConjLinearMap::new(block_diag(&vec![flip(self.d); self.bins]))
    }

    /// Entrywise conjugation `K` on the whole doubled space.
    pub fn k(&self) -> ConjLinearMap {
        let n = self.total_dim();
        ConjLinearMap::new(CMat::identity(n, n))
    }
}

/// Single-bin doubling `f -> (f, -conj f)`.
pub fn iota(f: &CVec) -> CVec {
    let d = f.len();
    CVec::from_fn(2 * d, |i, _| if i < d { f[i] } else { -f[i - d].conj() })
}

/// Conjugate-linear operator `v -> kernel * conj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjLinearMap {
    pub kernel: CMat,
}

impl ConjLinearMap {
    pub fn new(kernel: CMat) -> Self {
        Self { kernel }
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        &self.kernel * conj_vec(v)
    }

    /// Adjoint defined by `<T* x, u> = <T u, x>`; its kernel is the transpose.
    pub fn adjoint(&self) -> ConjLinearMap {
        ConjLinearMap::new(self.kernel.transpose())
    }

    /// `self ∘ other` is linear with matrix `A1 conj(A2)`.
    pub fn compose(&self, other: &ConjLinearMap) -> CMat {
        &self.kernel * conj_mat(&other.kernel)
    }

    /// `self ∘ lin` for a linear map.
    pub fn after_linear(&self, lin: &CMat) -> ConjLinearMap {
        ConjLinearMap::new(&self.kernel * conj_mat(lin))
    }

    /// `lin ∘ self` for a linear map.
    pub fn before_linear(&self, lin: &CMat) -> ConjLinearMap {
        ConjLinearMap::new(lin * &self.kernel)
    }

    /// Diagonal block of the kernel belonging to a time bin.
    pub fn bin_block(&self, model: &PhaseSpaceModel, bin: usize) -> CMat {
        let n = model.doubled_dim();
        self.kernel.view((bin * n, bin * n), (n, n)).into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Gauge,
    Squeezed,
    Prime,
    Custom,
}

/// Whether a degenerate (non-injective) `T` is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Permissive,
}

/// Covariance map: one `2d x 2d` block per time bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMap {
    pub model: PhaseSpaceModel,
    pub blocks: Vec<CMat>,
    pub kind: SigmaKind,
    /// Set when some block is not invertible (permissive degenerate `T`).
    pub singular: bool,
}

impl SigmaMap {
    pub fn custom(model: PhaseSpaceModel, blocks: Vec<CMat>) -> Result<Self> {
        check_blocks(&model, &blocks)?;
        let singular = blocks.iter().any(|b| b.clone().try_inverse().is_none() || min_singular(b) < SPECTRUM_TOL);
        Ok(Self { model, blocks, kind: SigmaKind::Custom, singular })
    }

    pub fn full(&self) -> CMat {
        block_diag(&self.blocks)
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        let n = self.model.doubled_dim();
        let mut out = CVec::zeros(v.len());
        for (b, blk) in self.blocks.iter().enumerate() {
            let seg = v.rows(b * n, n).into_owned();
            out.rows_mut(b * n, n).copy_from(&(blk * seg));
        }
        out
    }

    /// `Sigma iota(f)`.
    pub fn apply_iota(&self, f: &CVec) -> CVec {
        self.apply(&self.model.iota(f))
    }

    pub fn inverse_blocks(&self) -> Result<Vec<CMat>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(bin, b)| {
                if min_singular(b) < SPECTRUM_TOL {
                    return Err(PhaseSpaceError::Singular { bin });
                }
                b.clone().try_inverse().ok_or(PhaseSpaceError::Singular { bin })
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> SigmaMap {
        SigmaMap {
            model: self.model,
            blocks: self.blocks.iter().map(|b| b * c(factor, 0.0)).collect(),
            kind: SigmaKind::Custom,
            singular: self.singular,
        }
    }
}

fn min_singular(m: &CMat) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_blocks(model: &PhaseSpaceModel, blocks: &[CMat]) -> Result<()> {
    if blocks.len() != model.bins {
        return Err(PhaseSpaceError::DimensionMismatch { expected: model.bins, got: blocks.len() });
    }
    let n = model.doubled_dim();
    for b in blocks {
        if b.nrows() != n || b.ncols() != n {
            return Err(PhaseSpaceError::DimensionMismatch { expected: n, got: b.nrows().max(b.ncols()) });
        }
    }
    Ok(())
}

fn check_square(m: &CMat, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(PhaseSpaceError::DimensionMismatch { expected: d, got: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// Validates `T` for one bin; returns whether it is singular.
fn validate_t(bin: usize, t: &CMat, mode: Strictness) -> Result<bool> {
    let defect = hermitian_defect(t);
    if defect > STRUCTURE_TOL * (1.0 + t.norm()) {
        return Err(PhaseSpaceError::NotHermitian { bin, defect });
    }
    let min_eig = hermitian_eigenvalues(t)[0];
    if min_eig < -SPECTRUM_TOL {
        return Err(PhaseSpaceError::NegativeSpectrum { bin, min_eig });
    }
    let singular = min_eig <= SPECTRUM_TOL;
    if singular && mode == Strictness::Strict {
        return Err(PhaseSpaceError::NotInjective { bin, min_eig });
    }
    Ok(singular)
}

fn gauge_block(t: &CMat) -> CMat {
    let d = t.nrows();
    let id = CMat::identity(d, d);
    let upper = psd_sqrt(&(&id + t));
    let lower = conj_mat(&psd_sqrt(t));
    let z = CMat::zeros(d, d);
    block2(&upper, &z, &z, &lower)
}

/// Gauge-invariant covariance `diag(sqrt(I+T), K sqrt(T) K)` per bin.
pub fn build_sigma_gauge(model: PhaseSpaceModel, ts: &[CMat], mode: Strictness) -> Result<SigmaMap> {
    if ts.len() != model.bins {
        return Err(PhaseSpaceError::DimensionMismatch { expected: model.bins, got: ts.len() });
    }
    let mut singular = false;
    let mut blocks = Vec::with_capacity(ts.len());
    for (bin, t) in ts.iter().enumerate() {
        check_square(t, model.d)?;
        singular |= validate_t(bin, t, mode)?;
        blocks.push(gauge_block(t));
    }
    Ok(SigmaMap { model, blocks, kind: SigmaKind::Gauge, singular })
}

/// Squeezing data `(U, K', P)` for one bin. `kp` is the kernel `C` of the
/// conjugation `K' v = C conj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeParams {
    pub u: CMat,
    pub kp: CMat,
    pub p: CMat,
}

impl SqueezeParams {
    /// `U = I`, `K' = k`, `P = r I`.
    pub fn real_squeeze(d: usize, r: f64) -> Self {
        Self {
            u: CMat::identity(d, d),
            kp: CMat::identity(d, d),
            p: CMat::identity(d, d) * c(r, 0.0),
        }
    }
}

fn validate_squeeze(bin: usize, q: &SqueezeParams) -> Result<()> {
    let fail = |condition| Err(PhaseSpaceError::Squeezing { bin, condition });
    if unitary_defect(&q.u) > STRUCTURE_TOL {
        return fail("U is not unitary");
    }
    let d = q.kp.nrows();
    if unitary_defect(&q.kp) > STRUCTURE_TOL
        || (&q.kp * conj_mat(&q.kp) - CMat::identity(d, d)).norm() > STRUCTURE_TOL
    {
        return fail("K' is not a conjugation (kernel must be a symmetric unitary)");
    }
    if hermitian_defect(&q.p) > STRUCTURE_TOL * (1.0 + q.p.norm()) {
        return fail("P is not Hermitian");
    }
    if hermitian_eigenvalues(&q.p)[0] < -SPECTRUM_TOL {
        return fail("P is not positive semidefinite");
    }
    // K' commutes with the spectral projectors of P  <=>  C conj(P) = P C.
    if (&q.kp * conj_mat(&q.p) - &q.p * &q.kp).norm() > STRUCTURE_TOL * (1.0 + q.p.norm()) {
        return fail("K' does not commute with the spectral projectors of P");
    }
    Ok(())
}

/// Squeezed covariance `Sigma_T (U ⊕ K U K') Gamma (I ⊕ K' K)` per bin, with
/// `Gamma = [[cosh P, sinh P], [sinh P, cosh P]]`.
pub fn build_sigma_squeezed(
    model: PhaseSpaceModel,
    ts: &[CMat],
    squeezes: &[SqueezeParams],
    mode: Strictness,
) -> Result<SigmaMap> {
    if ts.len() != model.bins || squeezes.len() != model.bins {
        return Err(PhaseSpaceError::DimensionMismatch {
            expected: model.bins,
            got: ts.len().min(squeezes.len()),
        });
    }
    let d = model.d;
    let id = CMat::identity(d, d);
    let z = CMat::zeros(d, d);
    let mut singular = false;
    let mut blocks = Vec::with_capacity(model.bins);
    for (bin, (t, q)) in ts.iter().zip(squeezes).enumerate() {
        check_square(t, d)?;
        for m in [&q.u, &q.kp, &q.p] {
            check_square(m, d)?;
        }
        singular |= validate_t(bin, t, mode)?;
        validate_squeeze(bin, q)?;
        // K U K' is linear with matrix conj(U C); K' K is linear with matrix C.
        let unitary_part = block2(&q.u, &z, &z, &conj_mat(&(&q.u * &q.kp)));
        let cosh = hermitian_fn(&q.p, f64::cosh);
        let sinh = hermitian_fn(&q.p, f64::sinh);
        let gamma = block2(&cosh, &sinh, &sinh, &cosh);
        let tail = block2(&id, &z, &z, &q.kp);
        blocks.push(gauge_block(t) * unitary_part * gamma * tail);
    }
    Ok(SigmaMap { model, blocks, kind: SigmaKind::Squeezed, singular })
}

/// Commutant covariance `Sigma' = j Sigma (K ⊕ K)`, i.e. matrix `J conj(Sigma)`.
pub fn build_sigma_prime(sigma: &SigmaMap, j: &ConjLinearMap) -> Result<SigmaMap> {
    let model = sigma.model;
    let n = model.total_dim();
    if j.kernel.nrows() != n || j.kernel.ncols() != n {
        return Err(PhaseSpaceError::DimensionMismatch { expected: n, got: j.kernel.nrows() });
    }
    let full = &j.kernel * conj_mat(&sigma.full());
    let blocks = split_blocks(&model, &full)?;
    Ok(SigmaMap { model, blocks, kind: SigmaKind::Prime, singular: sigma.singular })
}

fn split_blocks(model: &PhaseSpaceModel, full: &CMat) -> Result<Vec<CMat>> {
    let n = model.doubled_dim();
    let mut blocks = Vec::with_capacity(model.bins);
    let mut off = full.clone();
    for b in 0..model.bins {
        blocks.push(full.view((b * n, b * n), (n, n)).into_owned());
        off.view_mut((b * n, b * n), (n, n)).fill(c(0.0, 0.0));
    }
    let mass = off.norm();
    if mass > STRUCTURE_TOL * (1.0 + full.norm()) {
        return Err(PhaseSpaceError::NotBlockDiagonal { mass });
    }
    Ok(blocks)
}

/// Closed-form gauge commutant covariance `[[0, sqrt T], [K sqrt(I+T) K, 0]]`.
pub fn gauge_sigma_prime_closed_form(model: PhaseSpaceModel, ts: &[CMat]) -> SigmaMap {
    let blocks = ts
        .iter()
        .map(|t| {
            let d = t.nrows();
            let z = CMat::zeros(d, d);
            block2(&z, &psd_sqrt(t), &conj_mat(&psd_sqrt(&(CMat::identity(d, d) + t))), &z)
        })
        .collect();
    SigmaMap { model, blocks, kind: SigmaKind::Prime, singular: false }
}

/// Outcome of a randomised identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// Symplectic form `Im <u, v>`.
pub fn sigma_form(u: &CVec, v: &CVec) -> f64 {
    u.dotc(v).im
}

/// `|Im<Sigma iota f, Sigma iota g> - Im<f, g>|` over random pairs.
pub fn check_symplectic<R: Rng + ?Sized>(sigma: &SigmaMap, trials: usize, rng: &mut R) -> CheckReport {
    let n = sigma.model.noise_dim();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let f = random_cvec(rng, n, 1.0);
        let g = random_cvec(rng, n, 1.0);
        let lhs = sigma_form(&sigma.apply_iota(&f), &sigma.apply_iota(&g));
        worst = worst.max((lhs - sigma_form(&f, &g)).abs());
    }
    CheckReport { max_deviation: worst, tolerance: SYMPLECTIC_TOL, trials }
}

/// `Sigma' iota` is symplectic on the conjugated domain.
pub fn check_prime_symplectic<R: Rng + ?Sized>(prime: &SigmaMap, trials: usize, rng: &mut R) -> CheckReport {
    check_symplectic(prime, trials, rng)
}

/// `|Im<Sigma iota f, Sigma' iota(conj g)>|` over random pairs.
pub fn check_duality<R: Rng + ?Sized>(
    sigma: &SigmaMap,
    prime: &SigmaMap,
    trials: usize,
    rng: &mut R,
) -> CheckReport {
    let n = sigma.model.noise_dim();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let f = random_cvec(rng, n, 1.0);
        let g = random_cvec(rng, n, 1.0);
        let v = sigma_form(&sigma.apply_iota(&f), &prime.apply_iota(&conj_vec(&g)));
        worst = worst.max(v.abs());
    }
    CheckReport { max_deviation: worst, tolerance: SYMPLECTIC_TOL, trials }
}

/// Real subspace of `C^n` held as an orthonormal basis of its `(Re, Im)` encoding.
#[derive(Debug, Clone)]
pub struct RealSubspace {
    basis: RMat,
}

impl RealSubspace {
    /// Real span of the given complex vectors.
    pub fn span(vectors: &[CVec], complex_dim: usize) -> Self {
        let cols: Vec<DVector<f64>> = vectors.iter().map(realify).collect();
        let m = if cols.is_empty() {
            RMat::zeros(2 * complex_dim, 0)
        } else {
            RMat::from_columns(&cols)
        };
        Self::from_real_columns(m)
    }

    pub fn from_real_columns(m: RMat) -> Self {
        let rows = m.nrows();
        if m.ncols() == 0 {
            return Self { basis: RMat::zeros(rows, 0) };
        }
        let svd = m.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > RANK_TOL * smax.max(1.0))
            .map(|(i, _)| i)
            .collect();
        let basis = RMat::from_fn(rows, keep.len(), |r, k| u[(r, keep[k])]);
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_real_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &RMat {
        &self.basis
    }

    /// Complex vectors forming a real basis.
    pub fn complex_basis(&self) -> Vec<CVec> {
        self.basis.column_iter().map(|col| complexify(&col.into_owned())).collect()
    }

    pub fn projector(&self) -> RMat {
        &self.basis * self.basis.transpose()
    }

    /// Complement with respect to the real inner product `Re<., .>`.
    pub fn real_orthogonal_complement(&self) -> Self {
        let n = self.ambient_real_dim();
        let comp = RMat::identity(n, n) - self.projector();
        let eig = SymmetricEigen::new((&comp + comp.transpose()) * 0.5);
        let keep: Vec<usize> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.5)
            .map(|(i, _)| i)
            .collect();
        let basis = RMat::from_fn(n, keep.len(), |r, k| eig.eigenvectors[(r, keep[k])]);
        Self { basis }
    }

    /// `i H` as a real subspace.
    pub fn times_i(&self) -> Self {
        let vecs: Vec<CVec> = self.complex_basis().iter().map(|v| v * c(0.0, 1.0)).collect();
        Self::span(&vecs, self.ambient_real_dim() / 2)
    }

    /// Image under a conjugate-linear map (which is real-linear).
    pub fn map_conj_linear(&self, m: &ConjLinearMap) -> Self {
        let vecs: Vec<CVec> = self.complex_basis().iter().map(|v| m.apply(v)).collect();
        Self::span(&vecs, m.kernel.nrows())
    }

    /// Spectral-norm distance between the orthogonal projectors.
    pub fn distance(&self, other: &RealSubspace) -> f64 {
        let diff = self.projector() - other.projector();
        let eig = SymmetricEigen::new((&diff + diff.transpose()) * 0.5);
        eig.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()))
    }

    pub fn intersection_dim(&self, other: &RealSubspace) -> usize {
        let mut cols: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(other.basis.column_iter().map(|c| c.into_owned()));
        if cols.is_empty() {
            return 0;
        }
        let joint = RMat::from_columns(&cols);
        self.dim() + other.dim() - rank_real(&joint, RANK_TOL)
    }
}

/// `H_1`: real span of `Sigma iota(e)` over a real basis `{e_a, i e_a}`.
pub fn subspace_h1(sigma: &SigmaMap) -> RealSubspace {
    let n = sigma.model.noise_dim();
    let mut vecs = Vec::with_capacity(2 * n);
    for a in 0..n {
        for phase in [c(1.0, 0.0), c(0.0, 1.0)] {
            let mut e = CVec::zeros(n);
            e[a] = phase;
            vecs.push(sigma.apply_iota(&e));
        }
    }
    RealSubspace::span(&vecs, sigma.model.total_dim())
}

/// Symplectic complement `H^{σ⊥} = (iH)^{Re ⊥}`.
pub fn symplectic_complement(h: &RealSubspace) -> RealSubspace {
    h.times_i().real_orthogonal_complement()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenericPosition {
    /// Dimensions of `H1∩H2`, `H1⊥∩H2`, `H1∩H2⊥`, `H1⊥∩H2⊥`.
    pub dims: [usize; 4],
}

impl GenericPosition {
    pub fn is_generic(&self) -> bool {
        self.dims.iter().all(|&d| d == 0)
    }
}

pub fn generic_position(h1: &RealSubspace, h2: &RealSubspace) -> GenericPosition {
    let h1p = h1.real_orthogonal_complement();
    let h2p = h2.real_orthogonal_complement();
    GenericPosition {
        dims: [
            h1.intersection_dim(h2),
            h1p.intersection_dim(h2),
            h1.intersection_dim(&h2p),
            h1p.intersection_dim(&h2p),
        ],
    }
}

/// One-particle Tomita map `s = Sigma K^pi Sigma^{-1}`, kernel `Sigma Pi conj(Sigma)^{-1}` per bin.
pub fn s_omega(sigma: &SigmaMap) -> Result<ConjLinearMap> {
    let inv = sigma.inverse_blocks()?;
    let flip_d = flip(sigma.model.d);
    let blocks: Vec<CMat> = sigma
        .blocks
        .iter()
        .zip(&inv)
        .map(|(s, si)| s * &flip_d * conj_mat(si))
        .collect();
    Ok(ConjLinearMap::new(block_diag(&blocks)))
}

/// Polar data `s = j ∘ delta^{1/2}` of an invertible conjugate-linear map.
#[derive(Debug, Clone)]
pub struct ModularOneParticle {
    pub s: ConjLinearMap,
    pub j: ConjLinearMap,
    pub delta_half: CMat,
}

pub fn polar_conjlinear(s: &ConjLinearMap) -> Result<ModularOneParticle> {
    let a = &s.kernel;
    let delta = a.transpose() * conj_mat(a);
    let min_eig = hermitian_eigenvalues(&delta)[0];
    if min_eig <= SPECTRUM_TOL {
        return Err(PhaseSpaceError::NonPositive { min_eig });
    }
    let delta_half = hermitian_fn(&delta, f64::sqrt);
    let delta_half_inv = hermitian_fn(&delta, |l| 1.0 / l.sqrt());
    let j = ConjLinearMap::new(a * conj_mat(&delta_half_inv));
    Ok(ModularOneParticle { s: s.clone(), j, delta_half })
}

/// Closed-form gauge modular data: `j = K^pi` and
/// `delta^{1/2} = diag(sqrt(I + T^{-1})^{-1}, K sqrt(I + T^{-1}) K)` per bin.
pub fn gauge_modular_closed_form(model: PhaseSpaceModel, ts: &[CMat]) -> (ConjLinearMap, CMat) {
    let blocks: Vec<CMat> = ts
        .iter()
        .map(|t| {
            let d = t.nrows();
            let z = CMat::zeros(d, d);
            let upper = hermitian_fn(t, |l| (1.0 + 1.0 / l).sqrt().recip());
            let lower = conj_mat(&hermitian_fn(t, |l| (1.0 + 1.0 / l).sqrt()));
            block2(&upper, &z, &z, &lower)
        })
        .collect();
    (model.k_pi(), block_diag(&blocks))
}

/// Scalar multiple of the identity, handy for `d = 1` configurations.
pub fn scalar_t(d: usize, value: f64) -> CMat {
    CMat::identity(d, d) * Complex64::new(value, 0.0)
}
