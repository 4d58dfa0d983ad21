//! Truncated symmetric Fock space over finitely many modes.
//!
//! Basis vectors are occupation multi-indices with total particle number at
//! most the cutoff, ordered by total number and then in descending
//! lexicographic order, so `(n, 0, .., 0)` opens each sector and the vacuum
//! comes first.

use num_complex::Complex64;

use crate::linalg::{c, conj_mat, conj_vec, CMat, CVec};
use crate::phase_space::ConjLinearMap;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearity {
    Linear,
    ConjLinear,
}

impl Linearity {
    fn compose(self, other: Linearity) -> Linearity {
        if self == other {
            Linearity::Linear
        } else {
            Linearity::ConjLinear
        }
    }
}

/// A one-particle map to be second-quantized.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeMap {
    Linear(CMat),
    ConjLinear(CMat),
}

impl ModeMap {
    fn kernel(&self) -> &CMat {
        match self {
            ModeMap::Linear(m) | ModeMap::ConjLinear(m) => m,
        }
    }

    fn linearity(&self) -> Linearity {
        match self {
            ModeMap::Linear(_) => Linearity::Linear,
            ModeMap::ConjLinear(_) => Linearity::ConjLinear,
        }
    }
}

impl From<&ConjLinearMap> for ModeMap {
    fn from(m: &ConjLinearMap) -> Self {
        ModeMap::ConjLinear(m.kernel.clone())
    }
}

/// Dense operator on a truncated Fock space. A conjugate-linear operator acts
/// as `v -> matrix * conj(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub matrix: CMat,
    pub linearity: Linearity,
}

impl FockOperator {
    pub fn linear(matrix: CMat) -> Self {
        Self { matrix, linearity: Linearity::Linear }
    }

    pub fn conj_linear(matrix: CMat) -> Self {
        Self { matrix, linearity: Linearity::ConjLinear }
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(CMat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        match self.linearity {
            Linearity::Linear => &self.matrix * v,
            Linearity::ConjLinear => &self.matrix * conj_vec(v),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FockOperator) -> FockOperator {
        let rhs = match self.linearity {
            Linearity::Linear => other.matrix.clone(),
            Linearity::ConjLinear => conj_mat(&other.matrix),
        };
        FockOperator { matrix: &self.matrix * rhs, linearity: self.linearity.compose(other.linearity) }
    }

    /// Linear adjoint is the conjugate transpose; the conjugate-linear adjoint
    /// (`<A* x, u> = <A u, x>`) is the plain transpose.
    pub fn adjoint(&self) -> FockOperator {
        let matrix = match self.linearity {
            Linearity::Linear => self.matrix.adjoint(),
            Linearity::ConjLinear => self.matrix.transpose(),
        };
        FockOperator { matrix, linearity: self.linearity }
    }

    pub fn scale(&self, z: Complex64) -> FockOperator {
        FockOperator { matrix: &self.matrix * z, linearity: self.linearity }
    }

    /// Sum of two operators of the same linearity.
    pub fn add(&self, other: &FockOperator) -> FockOperator {
        assert_eq!(self.linearity, other.linearity, "cannot add linear and conjugate-linear operators");
        FockOperator { matrix: &self.matrix + &other.matrix, linearity: self.linearity }
    }
}

/// Symmetric Fock space over `modes` modes truncated at `cutoff` particles.
#[derive(Debug, Clone)]
pub struct TruncatedFock {
    modes: usize,
    cutoff: usize,
    occ: Vec<u8>,
    totals: Vec<u8>,
    binom: Vec<Vec<u64>>,
    sector_start: Vec<usize>,
    raise: Vec<u32>,
    pred: Vec<(u32, u8)>,
}

impl TruncatedFock {
    pub fn new(modes: usize, cutoff: usize) -> Self {
        assert!(modes > 0, "at least one mode is required");
        assert!(cutoff < 255, "cutoff must fit in an occupation byte");
        let top = modes + cutoff + 1;
        let mut binom = vec![vec![0u64; top + 1]; top + 1];
        for n in 0..=top {
            binom[n][0] = 1;
            for k in 1..=n {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0 };
            }
        }
        let mut sector_start = Vec::with_capacity(cutoff + 2);
        for n in 0..=cutoff + 1 {
            sector_start.push(if n == 0 { 0 } else { binom[modes + n - 1][modes] as usize });
        }
        let dim = sector_start[cutoff + 1];

        let mut occ = Vec::with_capacity(dim * modes);
        let mut current = vec![0u8; modes];
        for n in 0..=cutoff {
            enumerate_sector(0, n, &mut current, &mut occ);
        }
        debug_assert_eq!(occ.len(), dim * modes);
        let totals = occ.chunks(modes).map(|o| o.iter().map(|&x| x as u32).sum::<u32>() as u8).collect();

        let mut space = Self {
            modes,
            cutoff,
            occ,
            totals,
            binom,
            sector_start,
            raise: Vec::new(),
            pred: Vec::new(),
        };
        space.build_tables();
        space
    }

    fn build_tables(&mut self) {
        let dim = self.dim();
        let m = self.modes;
        let mut raise = vec![NONE; dim * m];
        let mut pred = vec![(NONE, 0u8); dim];
        let mut buf = vec![0u8; m];
        for i in 0..dim {
            if self.totals[i] as usize >= self.cutoff {
                continue;
            }
            buf.copy_from_slice(self.occupation(i));
            let first_occupied = buf.iter().position(|&x| x > 0).unwrap_or(m);
            for a in 0..m {
                buf[a] += 1;
                let j = self.index_of(&buf).expect("raised index within cutoff");
                buf[a] -= 1;
                raise[i * m + a] = j as u32;
                if a <= first_occupied {
                    pred[j] = (i as u32, a as u8);
                }
            }
        }
        self.raise = raise;
        self.pred = pred;
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.totals.len()
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.occ[i * self.modes..(i + 1) * self.modes]
    }

    pub fn total(&self, i: usize) -> usize {
        self.totals[i] as usize
    }

    /// Index range of the `n`-particle sector.
    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.sector_start[n]..self.sector_start[n + 1]
    }

    /// Position of an occupation multi-index, `None` above the cutoff.
    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        assert_eq!(occupation.len(), self.modes);
        let n: usize = occupation.iter().map(|&x| x as usize).sum();
        if n > self.cutoff {
            return None;
        }
        let mut rank = 0u64;
        let mut remaining = n;
        for (i, &ni) in occupation.iter().enumerate().take(self.modes - 1) {
            let ni = ni as usize;
            let k = self.modes - i - 1;
            if ni < remaining {
                rank += self.binom[remaining - ni - 1 + k][k];
            }
            remaining -= ni;
        }
        Some(self.sector_start[n] + rank as usize)
    }

    /// Index reached by adding one particle to `mode`, if within the cutoff.
    pub fn raised(&self, i: usize, mode: usize) -> Option<usize> {
        if self.total(i) >= self.cutoff {
            return None;
        }
        Some(self.raise[i * self.modes + mode] as usize)
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = c(1.0, 0.0);
        v
    }

    /// Truncated exponential vector with coefficients `prod u_a^{n_a} / sqrt(n_a!)`.
    pub fn exp_vector(&self, u: &CVec) -> CVec {
        assert_eq!(u.len(), self.modes);
        let mut v = CVec::zeros(self.dim());
        v[0] = c(1.0, 0.0);
        for i in 1..self.dim() {
            let (p, a) = self.pred[i];
            let na = self.occupation(i)[a as usize] as f64;
            v[i] = v[p as usize] * u[a as usize] / na.sqrt();
        }
        v
    }

    /// `phi(u) = exp(-|u|^2 / 2) eps(u)`.
    pub fn normalized_exp_vector(&self, u: &CVec) -> CVec {
        self.exp_vector(u) * c((-0.5 * u.norm_squared()).exp(), 0.0)
    }

    /// Sparse application of `a†(u)`.
    pub fn creation_apply(&self, u: &CVec, v: &CVec) -> CVec {
        let m = self.modes;
        let mut out = CVec::zeros(self.dim());
        for i in 0..self.sector_start[self.cutoff] {
            let vi = v[i];
            if vi == c(0.0, 0.0) {
                continue;
            }
            let occ = self.occupation(i);
            for a in 0..m {
                if u[a] != c(0.0, 0.0) {
                    let j = self.raise[i * m + a] as usize;
                    out[j] += u[a] * vi * ((occ[a] as f64) + 1.0).sqrt();
                }
            }
        }
        out
    }

    /// Sparse application of `a(u) = sum conj(u_a) a_a`.
    pub fn annihilation_apply(&self, u: &CVec, v: &CVec) -> CVec {
        let m = self.modes;
        let mut out = CVec::zeros(self.dim());
        for i in 0..self.sector_start[self.cutoff] {
            let occ = self.occupation(i);
            let mut acc = c(0.0, 0.0);
            for a in 0..m {
                if u[a] != c(0.0, 0.0) {
                    let j = self.raise[i * m + a] as usize;
                    acc += u[a].conj() * v[j] * ((occ[a] as f64) + 1.0).sqrt();
                }
            }
            out[i] = acc;
        }
        out
    }

    /// `a†(e_mode) v`.
    pub fn mode_creation_apply(&self, mode: usize, v: &CVec) -> CVec {
        let mut e = CVec::zeros(self.modes);
        e[mode] = c(1.0, 0.0);
        self.creation_apply(&e, v)
    }

    /// `a(e_mode) v`.
    pub fn mode_annihilation_apply(&self, mode: usize, v: &CVec) -> CVec {
        let mut e = CVec::zeros(self.modes);
        e[mode] = c(1.0, 0.0);
        self.annihilation_apply(&e, v)
    }

    pub fn creation(&self, u: &CVec) -> FockOperator {
        let dim = self.dim();
        let m = self.modes;
        let mut mat = CMat::zeros(dim, dim);
        for i in 0..self.sector_start[self.cutoff] {
            let occ = self.occupation(i);
            for a in 0..m {
                let j = self.raise[i * m + a] as usize;
                mat[(j, i)] += u[a] * ((occ[a] as f64) + 1.0).sqrt();
            }
        }
        FockOperator::linear(mat)
    }

    pub fn annihilation(&self, u: &CVec) -> FockOperator {
        self.creation(u).adjoint()
    }

    pub fn number_operator(&self) -> FockOperator {
        FockOperator::linear(CMat::from_diagonal(&CVec::from_fn(self.dim(), |i, _| c(self.total(i) as f64, 0.0))))
    }

    /// Orthogonal projection onto sectors with at most `n` particles.
    pub fn sector_projection(&self, n: usize) -> FockOperator {
        let dim = self.dim();
        FockOperator::linear(CMat::from_diagonal(&CVec::from_fn(dim, |i, _| {
            c(if self.total(i) <= n { 1.0 } else { 0.0 }, 0.0)
        })))
    }

    /// Zeroes sectors above `n`.
    pub fn truncate_to(&self, v: &CVec, n: usize) -> CVec {
        let mut w = v.clone();
        for i in self.sector_start[(n + 1).min(self.cutoff + 1)]..self.dim() {
            w[i] = c(0.0, 0.0);
        }
        w
    }

    /// Dense Weyl operator `exp(a†(u) - a(u))`.
    pub fn weyl(&self, u: &CVec) -> FockOperator {
        let g = self.creation(u);
        let gen = &g.matrix - g.matrix.adjoint();
        FockOperator::linear(gen.exp())
    }

    /// Matrix-free `exp(a†(u) - a(u)) v` by a scaled Taylor series.
    pub fn weyl_apply(&self, u: &CVec, v: &CVec) -> CVec {
        let bound = 2.0 * u.norm() * (self.cutoff as f64).sqrt();
        let steps = bound.ceil().max(1.0) as usize;
        let h = u * c(1.0 / steps as f64, 0.0);
        let mut x = v.clone();
        for _ in 0..steps {
            let mut term = x.clone();
            let mut acc = x.clone();
            for k in 1..80 {
                let next = self.creation_apply(&h, &term) - self.annihilation_apply(&h, &term);
                term = next * c(1.0 / k as f64, 0.0);
                acc += &term;
                if term.norm() <= 1e-18 * acc.norm().max(1e-300) {
                    break;
                }
            }
            x = acc;
        }
        x
    }

    /// `W(u) Omega` computed matrix-free.
    pub fn weyl_vacuum(&self, u: &CVec) -> CVec {
        self.weyl_apply(u, &self.vacuum())
    }

    /// `Gamma(R)`, acting as `R^{∨n}` on the `n`-particle sector.
    pub fn second_quantize(&self, r: &ModeMap) -> FockOperator {
        let kernel = r.kernel();
        assert_eq!(kernel.nrows(), self.modes);
        assert_eq!(kernel.ncols(), self.modes);
        let dim = self.dim();
        let mut mat = CMat::zeros(dim, dim);
        mat[(0, 0)] = c(1.0, 0.0);
        for i in 1..dim {
            let (p, a) = self.pred[i];
            let na = self.occupation(i)[a as usize] as f64;
            let prev = mat.column(p as usize).into_owned();
            let image = kernel.column(a as usize).into_owned();
            let col = self.creation_apply(&image, &prev) * c(1.0 / na.sqrt(), 0.0);
            mat.set_column(i, &col);
        }
        FockOperator { matrix: mat, linearity: r.linearity() }
    }

    /// `S = Gamma(s)` for a one-particle conjugate-linear `s`.
    pub fn modular_s(&self, s: &ConjLinearMap) -> FockOperator {
        self.second_quantize(&ModeMap::from(s))
    }

    /// Compression of an operator to the one-particle sector.
    pub fn one_particle_block(&self, op: &FockOperator) -> CMat {
        let r = self.sector_range(1);
        let mut block = CMat::zeros(self.modes, self.modes);
        for i in r.clone() {
            let a_mode = self.occupation(i).iter().position(|&x| x == 1).unwrap();
            for j in r.clone() {
                let b_mode = self.occupation(j).iter().position(|&x| x == 1).unwrap();
                block[(a_mode, b_mode)] = op.matrix[(i, j)];
            }
        }
        block
    }
}

fn enumerate_sector(pos: usize, remaining: usize, current: &mut [u8], out: &mut Vec<u8>) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining as u8;
        out.extend_from_slice(current);
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v as u8;
        enumerate_sector(pos + 1, remaining - v, current, out);
    }
    current[pos] = 0;
}

/// `<Omega, op Omega>`.
pub fn vacuum_expectation(op: &FockOperator) -> Complex64 {
    op.matrix[(0, 0)]
}
