//! Quasifree integrals and martingales at vector level.
//!
//! An integrand is carried by its column `q_b = F_b^[] xi` per bin: the first
//! `d` legs hold the creation block `L_b xi`, the last `d` legs the transposed
//! annihilation block `M_b^T xi`. The initial space is trivial, so `xi` is the
//! Fock vacuum.

use num_complex::Complex64;

use crate::adapted::{AdaptedProcess, AdaptedSpace, Reconstruction, Result, VectorMartingale};
use crate::fock::FockOperator;
use crate::linalg::{c, CVec};
use crate::phase_space::{iota, SigmaMap};

/// `E^Sigma_j` at vector level.
pub fn conditional_expectation(space: &AdaptedSpace, x: &CVec, j: usize) -> Result<CVec> {
    space.project_pt(j, x)
}

/// Closed martingale `(E_j[x])_j`.
pub fn closed_martingale(space: &AdaptedSpace, x: &CVec) -> Result<VectorMartingale> {
    let values = (0..=space.bins()).map(|j| space.project_pt(j, x)).collect::<Result<Vec<_>>>()?;
    Ok(VectorMartingale { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfIntegrand {
    pub q: AdaptedProcess,
}

impl QfIntegrand {
    pub fn zeros(space: &AdaptedSpace) -> Self {
        Self { q: AdaptedProcess::zeros(space) }
    }

    /// Column from per-bin creation parts `l[b][a]` and transposed annihilation parts `mt[b][a]`.
    pub fn from_blocks(space: &AdaptedSpace, l: &[Vec<CVec>], mt: &[Vec<CVec>]) -> Self {
        let d = space.grid.d;
        let mut q = AdaptedProcess::zeros(space);
        for b in 0..space.bins() {
            for a in 0..d {
                q.entries[b][a] = l[b][a].clone();
                q.entries[b][d + a] = mt[b][a].clone();
            }
        }
        Self { q }
    }

    /// Creation part only.
    pub fn creation_part(&self, d: usize) -> QfIntegrand {
        self.mask(|leg| leg < d)
    }

    /// Annihilation part only.
    pub fn annihilation_part(&self, d: usize) -> QfIntegrand {
        self.mask(|leg| leg >= d)
    }

    fn mask(&self, keep: impl Fn(usize) -> bool) -> QfIntegrand {
        let mut q = self.q.clone();
        for legs in q.entries.iter_mut() {
            for (leg, v) in legs.iter_mut().enumerate() {
                if !keep(leg) {
                    v.fill(c(0.0, 0.0));
                }
            }
        }
        QfIntegrand { q }
    }

    /// Adjoint integrand column `(k^pi ⊗ S) q` pointwise.
    pub fn dagger(&self, space: &AdaptedSpace, s_fock: &FockOperator) -> QfIntegrand {
        QfIntegrand { q: space.kpi_s_pointwise(&self.q, s_fock) }
    }
}

/// `Lambda^Sigma_upto(F) xi = I^Sigma_upto(F^[] xi)`.
pub fn qf_integral(space: &AdaptedSpace, f: &QfIntegrand, sigma: &SigmaMap, upto: usize) -> Result<CVec> {
    space.ito_sigma(&f.q, sigma, upto)
}

/// `(Lambda^Sigma_j(F) xi)_{j = 0..=bins}`.
pub fn qf_integral_family(space: &AdaptedSpace, f: &QfIntegrand, sigma: &SigmaMap) -> Result<VectorMartingale> {
    space.integral_martingale(&CVec::zeros(space.dim()), &f.q, sigma)
}

/// `A†_upto(L) xi`.
pub fn creation_integral(space: &AdaptedSpace, f: &QfIntegrand, sigma: &SigmaMap, upto: usize) -> Result<CVec> {
    qf_integral(space, &f.creation_part(space.grid.d), sigma, upto)
}

/// `A_upto(M) xi`.
pub fn annihilation_integral(space: &AdaptedSpace, f: &QfIntegrand, sigma: &SigmaMap, upto: usize) -> Result<CVec> {
    qf_integral(space, &f.annihilation_part(space.grid.d), sigma, upto)
}

/// Quasifree martingale with the recovered or constructed integrand.
#[derive(Debug, Clone)]
pub struct Represented {
    pub integrand: QfIntegrand,
    pub residuals: Vec<f64>,
}

impl Represented {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Recovers `F^[] xi` from `x_t - x_0 = Lambda^Sigma_t(F) xi`.
pub fn represent(space: &AdaptedSpace, x: &VectorMartingale, sigma: &SigmaMap) -> Result<Represented> {
    let Reconstruction { z, residuals } = space.reconstruct_integrand(x, sigma)?;
    Ok(Represented { integrand: QfIntegrand { q: z }, residuals })
}

/// Report of the adjoint martingale check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaggerReport {
    /// `max_t |S(x_t - x_0) - Lambda^Sigma_t(F†) xi|`.
    pub integral_identity: f64,
    /// `max_t |S(x_t - x_0) - (y_t - y_0)|` against an independently built adjoint family.
    pub adjoint_family: f64,
}

/// Checks `X†_t - X†_0 = Lambda^Sigma_t(F†)` at vector level. The adjoint
/// family `y`, when supplied, is compared with `S x` directly.
pub fn dagger_martingale(
    space: &AdaptedSpace,
    x: &VectorMartingale,
    f: &QfIntegrand,
    sigma: &SigmaMap,
    s_fock: &FockOperator,
    adjoint: Option<&VectorMartingale>,
) -> Result<DaggerReport> {
    let fd = f.dagger(space, s_fock);
    let mut integral_identity = 0.0_f64;
    let mut adjoint_family = 0.0_f64;
    let s0 = s_fock.apply(&x.values[0]);
    for t in 1..x.values.len() {
        let st = s_fock.apply(&x.values[t]);
        let lhs = &st - &s0;
        integral_identity = integral_identity.max((&lhs - qf_integral(space, &fd, sigma, t)?).norm());
        if let Some(y) = adjoint {
            adjoint_family = adjoint_family.max((&lhs - (&y.values[t] - &y.values[0])).norm());
        }
    }
    Ok(DaggerReport { integral_identity, adjoint_family })
}

/// Stochastic exponential of a step function `f`.
#[derive(Debug, Clone)]
pub struct ExponentialMartingale {
    pub f: CVec,
    /// `u_j = Sigma iota(f restricted to the first j bins)`, `j = 0..=bins`.
    pub prefixes: Vec<CVec>,
    /// `x_j = E_j xi = eps(u_j)`.
    pub x: VectorMartingale,
    /// Left-point column `q_b = iota(f_b) ⊗ x_b`.
    pub integrand: QfIntegrand,
}

impl ExponentialMartingale {
    /// `E_j v = exp(|u_j|^2 / 2) W(u_j) v`.
    pub fn operator_apply(&self, space: &AdaptedSpace, j: usize, v: &CVec) -> CVec {
        let u = &self.prefixes[j];
        space.fock.weyl_apply(u, v) * c((0.5 * u.norm_squared()).exp(), 0.0)
    }

    /// `|(x_m - x_0) - Lambda^Sigma(F) xi|` with the left-point integrand.
    pub fn left_point_residual(&self, space: &AdaptedSpace, sigma: &SigmaMap) -> Result<f64> {
        let m = space.bins();
        let integral = qf_integral(space, &self.integrand, sigma, m)?;
        Ok(((&self.x.values[m] - &self.x.values[0]) - integral).norm())
    }
}

pub fn exponential_martingale(space: &AdaptedSpace, f: &CVec, sigma: &SigmaMap) -> ExponentialMartingale {
    let model = sigma.model;
    let (d, m) = (model.d, model.bins);
    let prefixes: Vec<CVec> = (0..=m).map(|j| sigma.apply_iota(&model.prefix(f, j))).collect();
    let values: Vec<CVec> = prefixes.iter().map(|u| space.fock.exp_vector(u)).collect();
    let mut q = AdaptedProcess::zeros(space);
    for b in 0..m {
        let fb = f.rows(b * d, d).into_owned();
        let leg = iota(&fb);
        let past = space.project_adapted(b, &values[b]);
        for (a, w) in leg.iter().enumerate() {
            q.entries[b][a] = &past * *w;
        }
    }
    ExponentialMartingale { f: f.clone(), prefixes, x: VectorMartingale { values }, integrand: QfIntegrand { q } }
}

/// Constant step function scaled so that `|Sigma iota(f)|^2 = total`.
pub fn constant_noise(sigma: &SigmaMap, value: Complex64, total: f64) -> CVec {
    let n = sigma.model.noise_dim();
    let f = CVec::from_element(n, value);
    let base = sigma.apply_iota(&f).norm_squared();
    if base == 0.0 {
        return f;
    }
    f * c((total / base).sqrt(), 0.0)
}

/// Field martingale `x_t = a†(Sigma iota(f_{<t})) xi` with integrand `iota(f_b) ⊗ xi`
/// and its independently built adjoint family `-x_t`.
pub fn field_martingale(space: &AdaptedSpace, f: &CVec, sigma: &SigmaMap) -> (VectorMartingale, QfIntegrand, VectorMartingale) {
    let model = sigma.model;
    let vac = space.fock.vacuum();
    let values: Vec<CVec> = (0..=model.bins)
        .map(|j| space.fock.creation_apply(&sigma.apply_iota(&model.prefix(f, j)), &vac))
        .collect();
    let adjoint = VectorMartingale { values: values.iter().map(|v| -v).collect() };
    let mut q = AdaptedProcess::zeros(space);
    for b in 0..model.bins {
        let leg = iota(&f.rows(b * model.d, model.d).into_owned());
        for (a, w) in leg.iter().enumerate() {
            q.entries[b][a] = &vac * *w;
        }
    }
    (VectorMartingale { values }, QfIntegrand { q }, adjoint)
}

/// Integrand `[[0, <g| ⊗ I], [|f> ⊗ I, 0]]`, whose column is `(f, conj g) ⊗ xi` per bin.
pub fn wiener_integrand(space: &AdaptedSpace, f: &CVec, g: &CVec) -> QfIntegrand {
    let d = space.grid.d;
    let vac = space.fock.vacuum();
    let mut q = AdaptedProcess::zeros(space);
    for b in 0..space.bins() {
        for a in 0..d {
            q.entries[b][a] = &vac * f[b * d + a];
            q.entries[b][d + a] = &vac * g[b * d + a].conj();
        }
    }
    QfIntegrand { q }
}
