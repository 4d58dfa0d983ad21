//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use qfsc_core::linalg::{c, hermitian_defect, CMat, CVec};
use qfsc_core::phase_space::{
    build_sigma_gauge, build_sigma_squeezed, PhaseSpaceError, PhaseSpaceModel, SigmaMap, SqueezeParams, Strictness,
};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid state: {0}")]
    State(#[from] PhaseSpaceError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub words: BTreeMap<String, Vec<Entry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub bins: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub cutoff: usize,
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    #[default]
    Gauge,
    Squeezed,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub kind: StateKind,
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(rename = "T", default = "unit")]
    pub t: MatrixSpec,
    #[serde(rename = "T_bins", default)]
    pub t_bins: Option<Vec<MatrixSpec>>,
    #[serde(rename = "P", default)]
    pub p: Option<MatrixSpec>,
    #[serde(rename = "U", default)]
    pub u: Option<MatrixSpec>,
    #[serde(rename = "Kp", default)]
    pub kp: Option<MatrixSpec>,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { kind: StateKind::Gauge, strict: true, t: unit(), t_bins: None, p: None, u: None, kp: None, scale: None }
    }
}

fn yes() -> bool {
    true
}

fn unit() -> MatrixSpec {
    MatrixSpec::Scalar(1.0)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "exact_tol")]
    pub exact: f64,
    #[serde(default = "truncated_tol")]
    pub truncated: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exact: exact_tol(), truncated: truncated_tol() }
    }
}

fn exact_tol() -> f64 {
    1e-12
}

fn truncated_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, trials: default_trials() }
    }
}

fn default_trials() -> usize {
    100
}

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn complex(self) -> Complex64 {
        match self {
            Entry::Real(x) => c(x, 0.0),
            Entry::Complex([re, im]) => c(re, im),
        }
    }
}

/// A multiple of the identity or explicit matrix rows.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<Entry>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, d: usize, what: &str) -> Result<CMat, ConfigError> {
        match self {
            MatrixSpec::Scalar(x) => Ok(CMat::identity(d, d) * c(*x, 0.0)),
            MatrixSpec::Rows(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(ConfigError::Invalid(format!("{what} must be {d}x{d}")));
                }
                Ok(CMat::from_fn(d, d, |i, j| rows[i][j].complex()))
            }
        }
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.d == 0 || m.bins == 0 || m.cutoff == 0 {
            return Err(ConfigError::Invalid("model.d, model.bins and model.cutoff must be positive".into()));
        }
        if !(m.dt > 0.0) {
            return Err(ConfigError::Invalid("model.dt must be positive".into()));
        }
        if !(self.tolerances.exact > 0.0 && self.tolerances.truncated > 0.0) {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        if self.run.trials == 0 {
            return Err(ConfigError::Invalid("run.trials must be positive".into()));
        }
        let ts = self.t_blocks()?;
        for (b, t) in ts.iter().enumerate() {
            if hermitian_defect(t) > 1e-12 {
                return Err(ConfigError::Invalid(format!("T for bin {b} is not Hermitian")));
            }
        }
        if let Some(s) = self.state.scale {
            if self.state.kind != StateKind::Custom {
                return Err(ConfigError::Invalid("state.scale applies to kind = \"custom\" only".into()));
            }
            if !s.is_finite() || s == 0.0 {
                return Err(ConfigError::Invalid("state.scale must be finite and non-zero".into()));
            }
        }
        if self.state.kind != StateKind::Squeezed
            && (self.state.p.is_some() || self.state.u.is_some() || self.state.kp.is_some())
        {
            return Err(ConfigError::Invalid("P, U and Kp apply to kind = \"squeezed\" only".into()));
        }
        self.squeeze_params()?;
        let n = m.d * m.bins;
        for (name, v) in &self.words {
            if v.len() != n {
                return Err(ConfigError::Invalid(format!("word vector `{name}` has length {}, expected {n}", v.len())));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> PhaseSpaceModel {
        PhaseSpaceModel::new(self.model.d, self.model.bins)
    }

    pub fn strictness(&self) -> Strictness {
        if self.state.strict {
            Strictness::Strict
        } else {
            Strictness::Permissive
        }
    }

    pub fn t_blocks(&self) -> Result<Vec<CMat>, ConfigError> {
        let d = self.model.d;
        match &self.state.t_bins {
            Some(list) => {
                if list.len() != self.model.bins {
                    return Err(ConfigError::Invalid(format!("T_bins needs {} entries", self.model.bins)));
                }
                list.iter().enumerate().map(|(b, s)| s.to_matrix(d, &format!("T_bins[{b}]"))).collect()
            }
            None => Ok(vec![self.state.t.to_matrix(d, "T")?; self.model.bins]),
        }
    }

    pub fn squeeze_params(&self) -> Result<SqueezeParams, ConfigError> {
        let d = self.model.d;
        let id = CMat::identity(d, d);
        let p = self.state.p.as_ref().map_or(Ok(CMat::zeros(d, d)), |s| s.to_matrix(d, "P"))?;
        let u = self.state.u.as_ref().map_or(Ok(id.clone()), |s| s.to_matrix(d, "U"))?;
        let kp = self.state.kp.as_ref().map_or(Ok(id), |s| s.to_matrix(d, "Kp"))?;
        Ok(SqueezeParams { u, kp, p })
    }

    /// Builds the covariance map described by `[state]`.
    pub fn sigma(&self) -> Result<SigmaMap, ConfigError> {
        let ts = self.t_blocks()?;
        let model = self.model();
        let mode = self.strictness();
        Ok(match self.state.kind {
            StateKind::Gauge => build_sigma_gauge(model, &ts, mode)?,
            StateKind::Squeezed => {
                let q = self.squeeze_params()?;
                build_sigma_squeezed(model, &ts, &vec![q; self.model.bins], mode)?
            }
            StateKind::Custom => build_sigma_gauge(model, &ts, mode)?.scaled(self.state.scale.unwrap_or(1.0)),
        })
    }

    pub fn word_env(&self) -> qfsc_core::weyl_word::Env {
        self.words
            .iter()
            .map(|(k, v)| (k.clone(), CVec::from_iterator(v.len(), v.iter().map(|e| e.complex()))))
            .collect()
    }
}
