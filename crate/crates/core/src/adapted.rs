//! Discrete adapted calculus on a truncated Fock space over a time grid.
//!
//! Bins are 0-based. Bin `b` owns the modes `b*2d .. (b+1)*2d`. A process entry
//! `z_b` is adapted when it carries no particles in bins `>= b`; it must also
//! stay strictly below the cutoff so that creating a bin-`b` particle is exact.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::fock::{FockOperator, TruncatedFock};
use crate::linalg::{c, random_cvec, CMat, CVec};
use crate::phase_space::{ConjLinearMap, PhaseSpaceError, PhaseSpaceModel, SigmaMap};

/// Coefficients below this magnitude count as zero in support predicates.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptedError {
    #[error("process entry at bin {bin}, leg {leg} is not adapted (mass {mass:.3e} outside the past)")]
    NotAdapted { bin: usize, leg: usize, mass: f64 },
    #[error("bin index {j} out of range 0..={bins}")]
    BinOutOfRange { j: usize, bins: usize },
    #[error("process shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    PhaseSpace(#[from] PhaseSpaceError),
}

pub type Result<T> = std::result::Result<T, AdaptedError>;

/// Time grid. `dt` is metadata only: `sqrt(dt)` is absorbed into coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub d: usize,
    pub bins: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(d: usize, bins: usize, dt: f64) -> Self {
        assert!(d > 0 && bins > 0);
        Self { d, bins, dt }
    }

    pub fn legs(&self) -> usize {
        2 * self.d
    }

    pub fn modes(&self) -> usize {
        self.bins * self.legs()
    }

    pub fn mode(&self, bin: usize, leg: usize) -> usize {
        bin * self.legs() + leg
    }

    pub fn bin_of_mode(&self, mode: usize) -> usize {
        mode / self.legs()
    }

    pub fn mode_range(&self, bin: usize) -> std::ops::Range<usize> {
        bin * self.legs()..(bin + 1) * self.legs()
    }

    pub fn phase_model(&self) -> PhaseSpaceModel {
        PhaseSpaceModel::new(self.d, self.bins)
    }
}

/// Truncated Fock space over a time grid with the per-basis-vector horizon
/// (one past the last occupied bin; 0 for the vacuum).
#[derive(Debug, Clone)]
pub struct AdaptedSpace {
    pub grid: TimeGrid,
    pub fock: TruncatedFock,
    horizon: Vec<u16>,
}

impl AdaptedSpace {
    pub fn new(grid: TimeGrid, cutoff: usize) -> Self {
        let fock = TruncatedFock::new(grid.modes(), cutoff);
        let horizon = (0..fock.dim())
            .map(|i| {
                fock.occupation(i)
                    .iter()
                    .rposition(|&n| n > 0)
                    .map_or(0, |mode| grid.bin_of_mode(mode) as u16 + 1)
            })
            .collect();
        Self { grid, fock, horizon }
    }

    pub fn dim(&self) -> usize {
        self.fock.dim()
    }

    pub fn bins(&self) -> usize {
        self.grid.bins
    }

    pub fn horizon(&self, i: usize) -> usize {
        self.horizon[i] as usize
    }

    fn is_adapted_index(&self, bin: usize, i: usize) -> bool {
        self.horizon(i) <= bin && self.fock.total(i) < self.fock.cutoff()
    }

    /// `P_j`: keeps coefficients with no particle in bins `>= j`.
    pub fn project_pt(&self, j: usize, x: &CVec) -> Result<CVec> {
        if j > self.bins() {
            return Err(AdaptedError::BinOutOfRange { j, bins: self.bins() });
        }
        Ok(CVec::from_fn(x.len(), |i, _| if self.horizon(i) <= j { x[i] } else { c(0.0, 0.0) }))
    }

    /// Diagonal matrix of `P_j`.
    pub fn project_pt_matrix(&self, j: usize) -> Result<CMat> {
        let diag = self.project_pt(j, &CVec::from_element(self.dim(), c(1.0, 0.0)))?;
        Ok(CMat::from_diagonal(&diag))
    }

    /// Projection onto the adapted subspace for bin `b`.
    pub fn project_adapted(&self, bin: usize, x: &CVec) -> CVec {
        CVec::from_fn(x.len(), |i, _| if self.is_adapted_index(bin, i) { x[i] } else { c(0.0, 0.0) })
    }

    fn adapted_mass(&self, bin: usize, x: &CVec) -> f64 {
        x.iter()
            .enumerate()
            .filter(|(i, _)| !self.is_adapted_index(bin, *i))
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_adapted(&self, z: &AdaptedProcess) -> Result<()> {
        self.check_shape(z)?;
        for (b, legs) in z.entries.iter().enumerate() {
            for (leg, v) in legs.iter().enumerate() {
                let mass = self.adapted_mass(b, v);
                if mass > SUPPORT_TOL {
                    return Err(AdaptedError::NotAdapted { bin: b, leg, mass });
                }
            }
        }
        Ok(())
    }

    fn check_shape(&self, z: &AdaptedProcess) -> Result<()> {
        if z.entries.len() != self.bins() {
            return Err(AdaptedError::Shape(format!("{} bins, expected {}", z.entries.len(), self.bins())));
        }
        for legs in &z.entries {
            if legs.len() != self.grid.legs() || legs.iter().any(|v| v.len() != self.dim()) {
                return Err(AdaptedError::Shape("leg count or Fock dimension".into()));
            }
        }
        Ok(())
    }

    /// Itô integral `sum_b sum_a a†(e_{b,a}) z_{b,a}`.
    pub fn ito(&self, z: &AdaptedProcess) -> Result<CVec> {
        self.check_adapted(z)?;
        Ok(self.ito_unchecked(z, self.bins()))
    }

    fn ito_unchecked(&self, z: &AdaptedProcess, upto: usize) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (b, legs) in z.entries.iter().enumerate().take(upto) {
            for (leg, v) in legs.iter().enumerate() {
                out += self.fock.mode_creation_apply(self.grid.mode(b, leg), v);
            }
        }
        out
    }

    /// Adapted gradient `D`, the adjoint of `ito`.
    pub fn adapted_gradient(&self, x: &CVec) -> AdaptedProcess {
        let entries = (0..self.bins())
            .map(|b| {
                (0..self.grid.legs())
                    .map(|leg| self.project_adapted(b, &self.fock.mode_annihilation_apply(self.grid.mode(b, leg), x)))
                    .collect()
            })
            .collect();
        AdaptedProcess { entries }
    }

    /// `I^Sigma_upto z = ito((Sigma_b z_b)_{b < upto})`.
    pub fn ito_sigma(&self, z: &AdaptedProcess, sigma: &SigmaMap, upto: usize) -> Result<CVec> {
        if upto > self.bins() {
            return Err(AdaptedError::BinOutOfRange { j: upto, bins: self.bins() });
        }
        if sigma.singular {
            sigma.inverse_blocks()?;
        }
        self.check_adapted(z)?;
        let w = z.map_linear(&sigma.blocks);
        Ok(self.ito_unchecked(&w, upto))
    }

    /// Matrix of `z -> I^Sigma z` on the coordinates of the adapted subspace.
    pub fn ito_sigma_matrix(&self, sigma: &SigmaMap) -> Result<CMat> {
        let coords = self.adapted_coordinates();
        let mut cols = Vec::with_capacity(coords.len());
        for &(b, leg, i) in &coords {
            let mut z = AdaptedProcess::zeros(self);
            z.entries[b][leg][i] = c(1.0, 0.0);
            cols.push(self.ito_sigma(&z, sigma, self.bins())?);
        }
        Ok(if cols.is_empty() { CMat::zeros(self.dim(), 0) } else { CMat::from_columns(&cols) })
    }

    /// All `(bin, leg, basis index)` triples spanning adapted processes.
    pub fn adapted_coordinates(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for b in 0..self.bins() {
            for leg in 0..self.grid.legs() {
                for i in 0..self.dim() {
                    if self.is_adapted_index(b, i) {
                        out.push((b, leg, i));
                    }
                }
            }
        }
        out
    }

    pub fn random_adapted<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> AdaptedProcess {
        let entries = (0..self.bins())
            .map(|b| {
                (0..self.grid.legs())
                    .map(|_| self.project_adapted(b, &random_cvec(rng, self.dim(), scale)))
                    .collect()
            })
            .collect();
        AdaptedProcess { entries }
    }

    /// `(x_j)_j = (x_0 + I^Sigma_j z)_j` for `j = 0..=bins`.
    pub fn integral_martingale(&self, x0: &CVec, z: &AdaptedProcess, sigma: &SigmaMap) -> Result<VectorMartingale> {
        let values = (0..=self.bins())
            .map(|j| Ok(x0 + self.ito_sigma(z, sigma, j)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorMartingale { values })
    }

    /// Largest `|P_j x_k - x_j|` over `j <= k`.
    pub fn martingale_defect(&self, x: &VectorMartingale) -> Result<f64> {
        let mut worst = 0.0_f64;
        for k in 0..x.values.len() {
            for j in 0..=k {
                worst = worst.max((self.project_pt(j, &x.values[k])? - &x.values[j]).norm());
            }
        }
        Ok(worst)
    }

    /// `z_b = Sigma_b^{-1} D(x_m - x_0)_b` and the per-bin residuals
    /// `|(x_j - x_0) - I^Sigma_j z|` for `j = 1..=bins`.
    pub fn reconstruct_integrand(&self, x: &VectorMartingale, sigma: &SigmaMap) -> Result<Reconstruction> {
        let inv = sigma.inverse_blocks()?;
        let last = x.values.last().expect("non-empty martingale");
        let grad = self.adapted_gradient(&(last - &x.values[0]));
        let z = grad.map_linear(&inv);
        let mut residuals = Vec::with_capacity(self.bins());
        for j in 1..=self.bins() {
            let approx = self.ito_sigma(&z, sigma, j)?;
            residuals.push(((&x.values[j] - &x.values[0]) - approx).norm());
        }
        Ok(Reconstruction { z, residuals })
    }

    /// Pointwise `(k^pi ⊗ S) z`: the flip on each leg and `S` on the past factor.
    pub fn kpi_s_pointwise(&self, z: &AdaptedProcess, s_fock: &FockOperator) -> AdaptedProcess {
        let k_pi = self.grid.phase_model().k_pi();
        z.map_conj_linear(&k_pi, self.grid.legs(), |v| s_fock.apply(v))
    }

    /// Modular/Itô commutation on Weyl-built inputs.
    ///
    /// Left side: `S ito(z)` with `S = Gamma(s)`. Right side: `ito(w)` with
    /// `w_b = (s_b ⊗ S_past) z_b`, where `S` on each past leg is either the
    /// adjoint-word oracle or `Gamma(s)` itself (`exact = true`).
    pub fn modular_ito_commutation(
        &self,
        sigma: &SigmaMap,
        s_one: &ConjLinearMap,
        s_fock: &FockOperator,
        input: &WeylProcess,
        exact: bool,
    ) -> Result<f64> {
        let z = input.materialize(self, sigma);
        let lhs = s_fock.apply(&self.ito(&z)?);
        let past_image = if exact { input.apply_gamma(self, sigma, s_fock) } else { input.adjoint_oracle(self, sigma) };
        let w = past_image.map_conj_linear(s_one, self.grid.legs(), |v| v.clone());
        self.check_adapted(&w)?;
        Ok((lhs - self.ito(&w)?).norm())
    }

    /// Pointwise identity `S(x_t - x_0) = I^Sigma_t((k^pi ⊗ S) z)` for
    /// `x_t - x_0 = I^Sigma_t z`, checked at every `t`.
    pub fn theorem_x_b(
        &self,
        sigma: &SigmaMap,
        s_fock: &FockOperator,
        input: &WeylProcess,
        exact: bool,
    ) -> Result<f64> {
        let z = input.materialize(self, sigma);
        let past_image = if exact { input.apply_gamma(self, sigma, s_fock) } else { input.adjoint_oracle(self, sigma) };
        let k_pi = self.grid.phase_model().k_pi();
        let transformed = past_image.map_conj_linear(&k_pi, self.grid.legs(), |v| v.clone());
        let mut worst = 0.0_f64;
        for t in 1..=self.bins() {
            let lhs = s_fock.apply(&self.ito_sigma(&z, sigma, t)?);
            let rhs = self.ito_sigma(&transformed, sigma, t)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }

    /// Same identity for an arbitrary pair `(x, z)` with `S` applied as a matrix on both sides.
    pub fn theorem_x_b_check(
        &self,
        x: &VectorMartingale,
        z: &AdaptedProcess,
        sigma: &SigmaMap,
        s_fock: &FockOperator,
    ) -> Result<f64> {
        let transformed = self.kpi_s_pointwise(z, s_fock);
        let mut worst = 0.0_f64;
        for t in 1..x.values.len() {
            let lhs = s_fock.apply(&(&x.values[t] - &x.values[0]));
            let rhs = self.ito_sigma(&transformed, sigma, t)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }
}

/// Process `z_b = sum_a e_a ⊗ zeta_{b,a}` stored as `entries[b][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    pub entries: Vec<Vec<CVec>>,
}

impl AdaptedProcess {
    pub fn zeros(space: &AdaptedSpace) -> Self {
        Self { entries: vec![vec![CVec::zeros(space.dim()); space.grid.legs()]; space.bins()] }
    }

    pub fn bin_norm_squared(&self, b: usize) -> f64 {
        self.entries[b].iter().map(|v| v.norm_squared()).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        (0..self.entries.len()).map(|b| self.bin_norm_squared(b)).sum()
    }

    /// Left multiplication of each bin by a linear block on the leg space.
    pub fn map_linear(&self, blocks: &[CMat]) -> AdaptedProcess {
        let entries = self
            .entries
            .iter()
            .zip(blocks)
            .map(|(legs, blk)| {
                (0..legs.len())
                    .map(|out| {
                        let mut acc = CVec::zeros(legs[0].len());
                        for (inp, v) in legs.iter().enumerate() {
                            let w = blk[(out, inp)];
                            if w != c(0.0, 0.0) {
                                acc += v * w;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        AdaptedProcess { entries }
    }

    /// `(T ⊗ X) z` with `T` conjugate-linear, block diagonal over bins, and `X`
    /// a conjugate-linear map on Fock vectors supplied as `leg_map`.
    pub fn map_conj_linear(&self, t: &ConjLinearMap, legs: usize, leg_map: impl Fn(&CVec) -> CVec) -> AdaptedProcess {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(b, vs)| {
                let images: Vec<CVec> = vs.iter().map(&leg_map).collect();
                (0..legs)
                    .map(|out| {
                        let mut acc = CVec::zeros(vs[0].len());
                        for (inp, img) in images.iter().enumerate() {
                            let w = t.kernel[(b * legs + out, b * legs + inp)];
                            if w != c(0.0, 0.0) {
                                acc += img * w;
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        AdaptedProcess { entries }
    }

    /// Zeroes bins `>= j`.
    pub fn truncate(&self, j: usize) -> AdaptedProcess {
        let mut out = self.clone();
        for legs in out.entries.iter_mut().skip(j) {
            for v in legs.iter_mut() {
                v.fill(c(0.0, 0.0));
            }
        }
        out
    }

    pub fn sub(&self, other: &AdaptedProcess) -> AdaptedProcess {
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        AdaptedProcess { entries }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|legs| legs.iter())
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }
}

/// Martingale values `x_0 .. x_bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMartingale {
    pub values: Vec<CVec>,
}

impl VectorMartingale {
    pub fn constant(x0: &CVec, bins: usize) -> Self {
        Self { values: vec![x0.clone(); bins + 1] }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub z: AdaptedProcess,
    pub residuals: Vec<f64>,
}

impl Reconstruction {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Past leg `coef * W(g1) W(g2) Omega` with `g = Sigma iota(f)` and `f`
/// supported on earlier bins.
#[derive(Debug, Clone)]
pub struct WeylLeg {
    pub coef: Complex64,
    pub f1: CVec,
    pub f2: CVec,
}

/// Process whose bin-`b` entry is `sum_a e_a ⊗ leg(b, a)`.
#[derive(Debug, Clone)]
pub struct WeylProcess {
    pub legs: Vec<Vec<WeylLeg>>,
}

impl WeylProcess {
    /// Random input whose Weyl arguments have `|Sigma iota(f)| = arg_norm` and
    /// leg coefficients of modulus at most `coef_scale`.
    pub fn random<R: Rng + ?Sized>(
        space: &AdaptedSpace,
        sigma: &SigmaMap,
        arg_norm: f64,
        coef_scale: f64,
        rng: &mut R,
    ) -> Self {
        let g = space.grid;
        let n = g.d * g.bins;
        let random_past = |b: usize, rng: &mut R| {
            let mut f = random_cvec(rng, n, 1.0);
            for i in (b * g.d)..n {
                f[i] = c(0.0, 0.0);
            }
            let norm = sigma.apply_iota(&f).norm();
            if norm > 0.0 {
                f *= c(arg_norm / norm, 0.0);
            }
            f
        };
        let legs = (0..g.bins)
            .map(|b| {
                (0..g.legs())
                    .map(|_| {
                        let coef = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * coef_scale;
                        let f1 = random_past(b, rng);
                        let f2 = random_past(b, rng);
                        WeylLeg { coef, f1, f2 }
                    })
                    .collect()
            })
            .collect();
        Self { legs }
    }

    fn leg_vector(space: &AdaptedSpace, sigma: &SigmaMap, leg: &WeylLeg, b: usize) -> CVec {
        let g1 = sigma.apply_iota(&leg.f1);
        let g2 = sigma.apply_iota(&leg.f2);
        let v = space.fock.weyl_apply(&g1, &space.fock.weyl_vacuum(&g2)) * leg.coef;
        space.project_adapted(b, &v)
    }

    pub fn materialize(&self, space: &AdaptedSpace, sigma: &SigmaMap) -> AdaptedProcess {
        let entries = self
            .legs
            .iter()
            .enumerate()
            .map(|(b, legs)| legs.iter().map(|leg| Self::leg_vector(space, sigma, leg, b)).collect())
            .collect();
        AdaptedProcess { entries }
    }

    /// `S` on each leg via `(c W(g1) W(g2))* = conj(c) W(-g2) W(-g1)`.
    pub fn adjoint_oracle(&self, space: &AdaptedSpace, sigma: &SigmaMap) -> AdaptedProcess {
        let entries = self
            .legs
            .iter()
            .enumerate()
            .map(|(b, legs)| {
                legs.iter()
                    .map(|leg| {
                        let g1 = -sigma.apply_iota(&leg.f1);
                        let g2 = -sigma.apply_iota(&leg.f2);
                        let v = space.fock.weyl_apply(&g2, &space.fock.weyl_vacuum(&g1)) * leg.coef.conj();
                        space.project_adapted(b, &v)
                    })
                    .collect()
            })
            .collect();
        AdaptedProcess { entries }
    }

    /// `Gamma(s)` applied to each materialized leg.
    pub fn apply_gamma(&self, space: &AdaptedSpace, sigma: &SigmaMap, s_fock: &FockOperator) -> AdaptedProcess {
        let z = self.materialize(space, sigma);
        AdaptedProcess {
            entries: z.entries.iter().map(|legs| legs.iter().map(|v| s_fock.apply(v)).collect()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::phase_space::{
        build_sigma_gauge, build_sigma_squeezed, s_omega, scalar_t, SqueezeParams, Strictness,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauge(bins: usize) -> SigmaMap {
        build_sigma_gauge(PhaseSpaceModel::new(1, bins), &vec![scalar_t(1, 1.0); bins], Strictness::Strict).unwrap()
    }

    fn space(bins: usize, cutoff: usize) -> AdaptedSpace {
        AdaptedSpace::new(TimeGrid::new(1, bins, 1.0), cutoff)
    }

    #[test]
    fn grid_slices_partition_modes() {
        let g = TimeGrid::new(2, 3, 0.5);
        let mut seen = vec![false; g.modes()];
        for b in 0..g.bins {
            for m in g.mode_range(b) {
                assert!(!seen[m]);
                seen[m] = true;
                assert_eq!(g.bin_of_mode(m), b);
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn projection_edge_cases() {
        let sp = space(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_cvec(&mut rng, sp.dim(), 1.0);
        assert_eq!(sp.project_pt(2, &x).unwrap(), x);
        let p0 = sp.project_pt(0, &x).unwrap();
        assert_eq!(p0, sp.fock.vacuum() * x[0]);
        assert!(matches!(sp.project_pt(3, &x), Err(AdaptedError::BinOutOfRange { j: 3, bins: 2 })));
    }

    #[test]
    fn projection_semigroup() {
        let sp = space(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_cvec(&mut rng, sp.dim(), 1.0);
        for j in 0..=3 {
            for k in 0..=3 {
                let lhs = sp.project_pt(j, &sp.project_pt(k, &x).unwrap()).unwrap();
                assert_eq!(lhs, sp.project_pt(j.min(k), &x).unwrap());
            }
        }
    }

    #[test]
    fn vacuum_component_survives_projection() {
        let sp = space(2, 10);
        let sigma = gauge(2);
        let f = CVec::from_vec(vec![c(0.2, 0.1), c(-0.1, 0.3)]);
        let x = sp.fock.weyl_vacuum(&sigma.apply_iota(&f));
        for j in 0..=2 {
            let p = sp.project_pt(j, &x).unwrap();
            assert!((p[0] - c((-0.5 * sigma.apply_iota(&f).norm_squared()).exp(), 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn ito_single_bin_creation() {
        let sp = space(1, 3);
        let mut z = AdaptedProcess::zeros(&sp);
        z.entries[0][0] = sp.fock.vacuum() * c(0.3, 0.4);
        let x = sp.ito(&z).unwrap();
        assert!((x.norm() - 0.5).abs() < 1e-15);
        let u = CVec::from_vec(vec![c(0.3, 0.4), c(0.0, 0.0)]);
        assert_eq!(x, sp.fock.creation_apply(&u, &sp.fock.vacuum()));
        assert_eq!(sp.ito(&AdaptedProcess::zeros(&sp)).unwrap().norm(), 0.0);
    }

    #[test]
    fn ito_rejects_non_adapted() {
        let sp = space(2, 3);
        let mut z = AdaptedProcess::zeros(&sp);
        let mut v = CVec::zeros(sp.dim());
        let idx = sp.fock.index_of(&[0, 0, 1, 0]).unwrap();
        v[idx] = c(1.0, 0.0);
        z.entries[1][0] = v;
        assert!(matches!(sp.ito(&z), Err(AdaptedError::NotAdapted { bin: 1, leg: 0, .. })));
    }

    #[test]
    fn ito_isometry_and_round_trip() {
        let sp = space(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let z = sp.random_adapted(&mut rng, 1.0);
            let x = sp.ito(&z).unwrap();
            assert!((x.norm_squared() - z.norm_squared()).abs() < 1e-12 * z.norm_squared().max(1.0));
            assert!(sp.adapted_gradient(&x).sub(&z).max_abs() < 1e-12);
            let again = sp.ito(&sp.adapted_gradient(&x)).unwrap();
            assert!((again - x).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_adjoint_of_ito() {
        let sp = space(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = sp.random_adapted(&mut rng, 1.0);
        let x = random_cvec(&mut rng, sp.dim(), 1.0);
        let lhs = sp.ito(&z).unwrap().dotc(&x);
        let dx = sp.adapted_gradient(&x);
        let rhs: Complex64 = z
            .entries
            .iter()
            .zip(&dx.entries)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| u.dotc(v)))
            .sum();
        assert!((lhs - rhs).norm() < 1e-12);
        assert_eq!(sp.adapted_gradient(&sp.fock.vacuum()).norm_squared(), 0.0);
    }

    #[test]
    fn gradient_commutes_with_projection() {
        let sp = space(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_cvec(&mut rng, sp.dim(), 1.0);
        for j in 0..=3 {
            let lhs = sp.adapted_gradient(&sp.project_pt(j, &x).unwrap());
            let rhs = sp.adapted_gradient(&x).truncate(j);
            assert!(lhs.sub(&rhs).max_abs() < 1e-14);
        }
    }

    #[test]
    fn ito_sigma_isometry_and_injectivity() {
        let sp = space(2, 3);
        let q = SqueezeParams::real_squeeze(1, 0.4);
        let sigma = build_sigma_squeezed(
            PhaseSpaceModel::new(1, 2),
            &[scalar_t(1, 1.0), scalar_t(1, 0.5)],
            &[q.clone(), q],
            Strictness::Strict,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = sp.random_adapted(&mut rng, 1.0);
        for t in 0..=2 {
            let x = sp.ito_sigma(&z, &sigma, t).unwrap();
            let expected: f64 = (0..t).map(|b| z.map_linear(&sigma.blocks).bin_norm_squared(b)).sum();
            assert!((x.norm_squared() - expected).abs() < 1e-12 * expected.max(1.0));
        }
        let m = sp.ito_sigma_matrix(&sigma).unwrap();
        assert_eq!(crate::linalg::rank_complex(&m, 1e-9), m.ncols());
    }

    #[test]
    fn ito_sigma_with_identity_is_ito() {
        let sp = space(2, 4);
        let id = SigmaMap::custom(PhaseSpaceModel::new(1, 2), vec![CMat::identity(2, 2); 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = sp.random_adapted(&mut rng, 1.0);
        assert!((sp.ito_sigma(&z, &id, 2).unwrap() - sp.ito(&z).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn integral_is_martingale_and_reconstructs() {
        let sp = space(3, 4);
        let sigma = gauge(3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = sp.random_adapted(&mut rng, 0.5);
        let x0 = sp.fock.vacuum() * c(0.7, -0.2);
        let x = sp.integral_martingale(&x0, &z, &sigma).unwrap();
        assert!(sp.martingale_defect(&x).unwrap() < 1e-12);
        let rec = sp.reconstruct_integrand(&x, &sigma).unwrap();
        assert!(rec.z.sub(&z).max_abs() < 1e-10);
        assert!(rec.max_residual() < 1e-12);

        let constant = VectorMartingale::constant(&x0, 3);
        let rec = sp.reconstruct_integrand(&constant, &sigma).unwrap();
        assert_eq!(rec.z.max_abs(), 0.0);
        assert_eq!(rec.max_residual(), 0.0);
    }

    #[test]
    fn modular_commutation_one_particle() {
        let sp = space(2, 6);
        let sigma = gauge(2);
        let s = s_omega(&sigma).unwrap();
        let big_s = sp.fock.modular_s(&s);
        let mut z = AdaptedProcess::zeros(&sp);
        z.entries[0][0] = sp.fock.vacuum() * c(0.3, 0.1);
        z.entries[1][1] = sp.fock.vacuum() * c(-0.2, 0.4);
        let lhs = big_s.apply(&sp.ito(&z).unwrap());
        let w = z.map_conj_linear(&s, 2, |v| big_s.apply(v));
        assert!((lhs - sp.ito(&w).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn conjugation_covariance_of_creation() {
        let sp = space(1, 4);
        let k_pi = sp.grid.phase_model().k_pi();
        let gamma = sp.fock.modular_s(&k_pi);
        let cvec = CVec::from_vec(vec![c(0.3, 0.2), c(-0.1, 0.5)]);
        let lhs = gamma.apply(&sp.fock.creation_apply(&cvec, &sp.fock.vacuum()));
        let rhs = sp.fock.creation_apply(&k_pi.apply(&cvec), &sp.fock.vacuum());
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn modular_commutation_weyl_inputs() {
        let sigma = gauge(2);
        let s = s_omega(&sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sp = space(2, 8);
        let input = WeylProcess::random(&sp, &sigma, 0.3, 0.5, &mut rng);
        let big_s = sp.fock.modular_s(&s);
        let exact = sp.modular_ito_commutation(&sigma, &s, &big_s, &input, true).unwrap();
        assert!(exact < 1e-12);
        let oracle = sp.modular_ito_commutation(&sigma, &s, &big_s, &input, false).unwrap();
        assert!(oracle < 1e-6);
    }

    #[test]
    fn theorem_x_b_pairs() {
        let sigma = gauge(2);
        let s = s_omega(&sigma).unwrap();
        let sp = space(2, 6);
        let big_s = sp.fock.modular_s(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let z = sp.random_adapted(&mut rng, 0.5);
        let x0 = sp.fock.vacuum();
        let x = sp.integral_martingale(&x0, &z, &sigma).unwrap();
        assert!(sp.theorem_x_b_check(&x, &z, &sigma, &big_s).unwrap() < 1e-12);
        let zero = AdaptedProcess::zeros(&sp);
        let x = VectorMartingale::constant(&x0, 2);
        assert_eq!(sp.theorem_x_b_check(&x, &zero, &sigma, &big_s).unwrap(), 0.0);

        let input = WeylProcess::random(&sp, &sigma, 0.3, 0.5, &mut rng);
        assert!(sp.theorem_x_b(&sigma, &big_s, &input, true).unwrap() < 1e-12);
    }

    #[test]
    fn block_maps_commute_with_filtration() {
        let sp = space(2, 4);
        let sigma = gauge(2);
        let big_s = sp.fock.modular_s(&s_omega(&sigma).unwrap());
        for j in 0..=2 {
            let p = FockOperator::linear(sp.project_pt_matrix(j).unwrap());
            assert!(max_abs_diff(&big_s.compose(&p).matrix, &p.compose(&big_s).matrix) < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = sp.random_adapted(&mut rng, 1.0);
        for j in 0..=2 {
            let a = z.map_linear(&sigma.blocks).truncate(j);
            let b = z.truncate(j).map_linear(&sigma.blocks);
            assert_eq!(a, b);
        }
    }
}
