//! Dense complex linear algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn conj_mat(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Inner product, conjugate-linear in the first argument.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

pub fn unitary_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    (m.adjoint() * m - CMat::identity(n, n)).norm()
}

/// Applies a real function to a Hermitian matrix through its eigendecomposition.
/// The input is symmetrised first so round-off asymmetry does not leak in.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| c(f(l), 0.0)));
    v * d * v.adjoint()
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    let mut vals: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Tiny negative eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_fn(m, |l| l.max(0.0).sqrt())
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// 2x2 block matrix [[a, b], [c, d]] from equally sized square blocks.
pub fn block2(a: &CMat, b: &CMat, cm: &CMat, d: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(cm);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

/// Sum-flip on a doubled space of half-dimension `d`.
pub fn flip(d: usize) -> CMat {
    let id = CMat::identity(d, d);
    let z = CMat::zeros(d, d);
    block2(&z, &id, &id, &z)
}

/// Entries uniform in the unit square of the complex plane, scaled.
pub fn random_cvec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CVec {
    CVec::from_fn(n, |_, _| {
        c(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
    })
}

pub fn random_cmat<R: Rng + ?Sized>(rng: &mut R, r: usize, cl: usize, scale: f64) -> CMat {
    CMat::from_fn(r, cl, |_, _| {
        c(rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
    })
}

/// Random vector rescaled to the given Euclidean norm.
pub fn random_cvec_with_norm<R: Rng + ?Sized>(rng: &mut R, n: usize, norm: f64) -> CVec {
    let v = random_cvec(rng, n, 1.0);
    let nv = v.norm();
    if nv == 0.0 {
        v
    } else {
        v * c(norm / nv, 0.0)
    }
}

/// Real encoding of a complex vector: real parts stacked over imaginary parts.
pub fn realify(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn complexify(r: &DVector<f64>) -> CVec {
    let n = r.len() / 2;
    CVec::from_fn(n, |i, _| c(r[i], r[i + n]))
}

/// Numerical rank from singular values above `tol`.
pub fn rank_real(m: &RMat, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

pub fn rank_complex(m: &CMat, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_sqrt_squares_back() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let r = psd_sqrt(&m);
        assert!(max_abs_diff(&(&r * &r), &m) < 1e-13);
        assert!(hermitian_defect(&r) < 1e-13);
    }

    #[test]
    fn realify_roundtrip() {
        let v = CVec::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5)]);
        assert_eq!(complexify(&realify(&v)), v);
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = CMat::identity(1, 1) * c(2.0, 0.0);
        let b = CMat::identity(2, 2) * c(3.0, 0.0);
        let m = block_diag(&[a, b]);
        assert_eq!(m[(0, 0)], c(2.0, 0.0));
        assert_eq!(m[(2, 2)], c(3.0, 0.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
    }
}
