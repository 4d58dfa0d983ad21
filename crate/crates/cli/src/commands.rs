//! Subcommand implementations. Each returns the text for stdout and an exit code.

use std::fmt::Write as _;
use std::path::Path;

use qfsc_core::adapted::{AdaptedSpace, TimeGrid, WeylProcess};
use qfsc_core::linalg::{c, max_abs_diff, random_cvec_with_norm, CMat};
use qfsc_core::fock::TruncatedFock;
use qfsc_core::phase_space::{gauge_modular_closed_form, polar_conjlinear, s_omega};
use qfsc_core::qf_martingale::{constant_noise, exponential_martingale, qf_integral_family, represent, QfIntegrand};
use qfsc_core::weyl_word::{bind, expect_truncated, parse, WordError, DEFAULT_BUDGET};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Config, ConfigError, StateKind};
use crate::report::Report;
use crate::suite::{rng_for, run_suite, Context, DENSE_LIMIT};

pub const CSV_HEADER: &str = "bins,cutoff,quantity,value";
const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub exit: i32,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn matrix_json(m: &CMat) -> Value {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    json!(rows)
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.8}", z.re)
    } else {
        format!("{:.8}{:+.8}i", z.re, z.im)
    }
}

fn matrix_text(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>24}", fmt_complex(m[(i, j)]))).collect();
        let _ = writeln!(out, "  [{}]", row.join(" "));
    }
    out
}

/// Runs the invariant suite, writes the JSON report and lists each check.
pub fn cmd_check(cfg: &Config, seed: u64, out: &Path) -> Result<Output, CliError> {
    let ctx = Context::new(cfg, seed)?;
    let report = Report::new("check", seed, run_suite(&ctx));
    write_file(out, &report.to_json())?;
    let mut stdout = String::new();
    for r in &report.checks {
        let dev = r.max_deviation.map_or("-".to_string(), |d| format!("{d:.3e}"));
        let status = format!("{:?}", r.status).to_uppercase();
        let _ = writeln!(stdout, "{status:<5} {:<40} {dev:>10} (tol {:.1e})", r.name, r.tolerance);
    }
    let s = report.summary;
    let _ = writeln!(stdout, "{} checks: {} passed, {} failed, {} skipped", s.total, s.passed, s.failed, s.skipped);
    let _ = writeln!(stdout, "report written to {}", out.display());
    Ok(Output { stdout, exit: if report.all_passed() { 0 } else { 1 } })
}

/// Polar-derived one-particle modular data next to the closed form.
pub fn cmd_modular(cfg: &Config, out: Option<&Path>) -> Result<Output, CliError> {
    let sigma = cfg.sigma()?;
    let s = s_omega(&sigma).map_err(ConfigError::from)?;
    let p = polar_conjlinear(&s).map_err(ConfigError::from)?;
    let n = sigma.model.total_dim();
    let s_squared = max_abs_diff(&s.compose(&s), &CMat::identity(n, n));
    let mut stdout = String::new();
    let _ = writeln!(stdout, "s_Ω kernel (v ↦ A conj(v)):\n{}", matrix_text(&s.kernel));
    let _ = writeln!(stdout, "j_Ω kernel (polar):\n{}", matrix_text(&p.j.kernel));
    let _ = writeln!(stdout, "δ_Ω^{{1/2}} (polar):\n{}", matrix_text(&p.delta_half));
    let _ = writeln!(stdout, "|s² - I| = {s_squared:.3e}");
    let mut doc = json!({
        "s": matrix_json(&s.kernel),
        "j": matrix_json(&p.j.kernel),
        "delta_half": matrix_json(&p.delta_half),
        "s_squared_defect": s_squared,
    });
    let mut ok = s_squared <= STRUCTURE_TOL;
    if cfg.state.kind != StateKind::Custom {
        let (j, dh) = gauge_modular_closed_form(sigma.model, &cfg.t_blocks()?);
        let diff = max_abs_diff(&j.kernel, &p.j.kernel).max(max_abs_diff(&dh, &p.delta_half));
        let _ = writeln!(stdout, "j_Ω kernel (closed form):\n{}", matrix_text(&j.kernel));
        let _ = writeln!(stdout, "δ_Ω^{{1/2}} (closed form):\n{}", matrix_text(&dh));
        let _ = writeln!(stdout, "max diff polar vs closed form = {diff:.3e}");
        doc["closed_form"] = json!({ "j": matrix_json(&j.kernel), "delta_half": matrix_json(&dh), "max_diff": diff });
        ok &= diff <= STRUCTURE_TOL;
    }
    if let Some(path) = out {
        write_file(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
    }
    Ok(Output { stdout, exit: if ok { 0 } else { 1 } })
}

fn word_error(text: &str, e: &WordError) -> CliError {
    let span = match e {
        WordError::Syntax { span, .. } | WordError::Unbound { span, .. } => Some(*span),
        WordError::Dimension { .. } => None,
    };
    let mut msg = format!("{e}");
    if let Some(s) = span {
        let width = s.end.saturating_sub(s.start).max(1);
        let _ = write!(msg, "\n  {text}\n  {}{}", " ".repeat(s.start), "^".repeat(width));
    }
    CliError::Usage(msg)
}

/// Exact and truncated vacuum expectation of a Weyl word.
pub fn cmd_expect(cfg: &Config, word: &str, out: Option<&Path>) -> Result<Output, CliError> {
    let sigma = cfg.sigma()?;
    let expr = parse(word).map_err(|e| word_error(word, &e))?;
    let bound = bind(expr, &cfg.word_env(), sigma.model.noise_dim()).map_err(|e| word_error(word, &e))?;
    let fock = TruncatedFock::new(sigma.model.total_dim(), cfg.model.cutoff);
    let r = expect_truncated(&bound, &sigma, &fock, DEFAULT_BUDGET);
    let mut stdout = String::new();
    let _ = writeln!(stdout, "word       {word}");
    let _ = writeln!(stdout, "exact      {}", fmt_complex(r.exact));
    let _ = writeln!(stdout, "truncated  {}", fmt_complex(r.truncated));
    let _ = writeln!(stdout, "diff       {:.3e}", r.diff);
    if let Some(w) = &r.warning {
        let _ = writeln!(stdout, "warning    {w}");
    }
    if let Some(path) = out {
        let doc = json!({
            "word": word,
            "exact": [r.exact.re, r.exact.im],
            "truncated": [r.truncated.re, r.truncated.im],
            "diff": r.diff,
            "cutoff": cfg.model.cutoff,
            "warning": r.warning,
        });
        write_file(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
    }
    Ok(Output { stdout, exit: if r.diff <= cfg.tolerances.truncated { 0 } else { 1 } })
}

fn space_for(cfg: &Config) -> AdaptedSpace {
    AdaptedSpace::new(TimeGrid::new(cfg.model.d, cfg.model.bins, cfg.model.dt), cfg.model.cutoff)
}

/// Integrate-then-represent round trip and the exponential-martingale residual table.
pub fn cmd_martingale(cfg: &Config, seed: u64, out: Option<&Path>) -> Result<Output, CliError> {
    let sigma = cfg.sigma()?;
    let sp = space_for(cfg);
    let fail = |e: qfsc_core::adapted::AdaptedError| CliError::Usage(e.to_string());
    let mut rng = rng_for(seed, "martingale.round_trip");
    let f = QfIntegrand { q: sp.random_adapted(&mut rng, 0.5) };
    let x = qf_integral_family(&sp, &f, &sigma).map_err(fail)?;
    let rep = represent(&sp, &x, &sigma).map_err(fail)?;
    let round_trip = rep.integrand.q.sub(&f.q).max_abs();

    let noise = constant_noise(&sigma, c(1.0, 0.0), 0.25);
    let em = exponential_martingale(&sp, &noise, &sigma);
    let exp_rep = represent(&sp, &em.x, &sigma).map_err(fail)?;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "round trip: max |F - F_recovered| = {round_trip:.3e}, max residual = {:.3e}", rep.max_residual());
    let _ = writeln!(stdout, "exponential martingale, |Σι(f)|² = 0.25 over {} bins", sp.bins());
    let _ = writeln!(stdout, "{:>5} {:>14}", "t", "residual");
    for (t, r) in exp_rep.residuals.iter().enumerate() {
        let _ = writeln!(stdout, "{:>5} {:>14.6e}", t + 1, r);
    }
    if let Some(path) = out {
        let doc = json!({
            "round_trip": round_trip,
            "round_trip_residual": rep.max_residual(),
            "exponential_residuals": exp_rep.residuals,
        });
        write_file(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
    }
    let ok = round_trip.max(rep.max_residual()) <= 100.0 * cfg.tolerances.exact;
    Ok(Output { stdout, exit: if ok { 0 } else { 1 } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Bins,
    Cutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub bins: usize,
    pub cutoff: usize,
    pub quantity: &'static str,
    pub value: f64,
}

/// Rebinned copy of the config with the total time held fixed.
fn with_bins(cfg: &Config, bins: usize) -> Config {
    let mut out = cfg.clone();
    out.model.dt = cfg.model.dt * cfg.model.bins as f64 / bins as f64;
    out.model.bins = bins;
    out.words.clear();
    out
}

fn sweep_point(cfg: &Config, seed: u64, dimension: Dimension) -> Result<Vec<SweepRow>, CliError> {
    let (bins, cutoff) = (cfg.model.bins, cfg.model.cutoff);
    let sigma = cfg.sigma()?;
    let sp = space_for(cfg);
    let row = |quantity, value| SweepRow { bins, cutoff, quantity, value };
    let mut rows = Vec::new();
    match dimension {
        Dimension::Bins => {
            let f = constant_noise(&sigma, c(1.0, 0.0), 0.25);
            let em = exponential_martingale(&sp, &f, &sigma);
            let rep = represent(&sp, &em.x, &sigma).map_err(|e| CliError::Usage(e.to_string()))?;
            rows.push(row("exponential_residual", rep.final_residual()));
        }
        Dimension::Cutoff => {
            let fock = &sp.fock;
            let mut rng = rng_for(seed, "sweep.weyl_relation");
            let modes = fock.modes();
            let u = random_cvec_with_norm(&mut rng, modes, 0.5);
            let v = random_cvec_with_norm(&mut rng, modes, 0.5);
            let w = fock.normalized_exp_vector(&random_cvec_with_norm(&mut rng, modes, 0.5));
            let phase = Complex64::from_polar(1.0, -u.dotc(&v).im);
            let lhs = fock.weyl_apply(&u, &fock.weyl_apply(&v, &w));
            let rhs = fock.weyl_apply(&(&u + &v), &w) * phase;
            rows.push(row("weyl_relation", (lhs - rhs).norm()));
            if !sigma.singular && sp.dim() <= DENSE_LIMIT {
                let s = s_omega(&sigma).map_err(ConfigError::from)?;
                let big_s = fock.modular_s(&s);
                let mut rng = rng_for(seed, "sweep.modular_ito");
                let input = WeylProcess::random(&sp, &sigma, 0.5, 0.5, &mut rng);
                let dev = sp
                    .modular_ito_commutation(&sigma, &s, &big_s, &input, false)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                rows.push(row("modular_ito", dev));
            }
        }
    }
    Ok(rows)
}

/// Refinement rows for each value of the swept dimension, in input order.
pub fn sweep_rows(cfg: &Config, seed: u64, dimension: Dimension, values: &[usize]) -> Result<Vec<SweepRow>, CliError> {
    if values.contains(&0) {
        return Err(CliError::Usage("sweep values must be positive".into()));
    }
    let per_point: Vec<Result<Vec<SweepRow>, CliError>> = values
        .par_iter()
        .map(|&v| {
            let point = match dimension {
                Dimension::Bins => with_bins(cfg, v),
                Dimension::Cutoff => {
                    let mut c = cfg.clone();
                    c.model.cutoff = v;
                    c
                }
            };
            sweep_point(&point, seed, dimension)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:e}", r.bins, r.cutoff, r.quantity, r.value);
    }
    out
}

pub fn cmd_sweep(
    cfg: &Config,
    seed: u64,
    dimension: Dimension,
    values: &[usize],
    out: Option<&Path>,
) -> Result<Output, CliError> {
    let csv = sweep_csv(&sweep_rows(cfg, seed, dimension, values)?);
    match out {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(Output { stdout: format!("sweep written to {}\n", path.display()), exit: 0 })
        }
        None => Ok(Output { stdout: csv, exit: 0 }),
    }
}
