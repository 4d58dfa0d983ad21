//! Weyl polynomials: parsing, normal forms and exact quasifree expectations.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (['*'] factor)*
//! factor := ['-'] (scalar | 'W(' ident ')' ['*'] | '(' expr ')')
//! scalar := number ['i'] | 'i'
//! ```
//!
//! A `*` written directly after the closing parenthesis of a generator marks
//! the adjoint, so `W(f)*W(f)` reads as `W(f)^* W(f)`. Separate factors by a
//! spaced `*` or by juxtaposition. Write complex literals in parentheses,
//! e.g. `(1+2i) * W(f)`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::fock::TruncatedFock;
use crate::linalg::{c, CVec};
use crate::phase_space::SigmaMap;

/// Vectors closer than this in every entry are merged in a normal form.
pub const DEDUP_TOL: f64 = 1e-14;
/// Default bound on the summed argument norms of one monomial.
pub const DEFAULT_BUDGET: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("syntax error at {}..{}: {message}", span.start, span.end)]
    Syntax { message: String, span: Span },
    #[error("unbound identifier `{name}` at {}..{}", span.start, span.end)]
    Unbound { name: String, span: Span },
    #[error("identifier `{name}` has length {got}, expected {expected}")]
    Dimension { name: String, expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, WordError>;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Scalar { value: Complex64, span: Span },
    Generator { name: String, adjoint: bool, span: Span },
    Product { factors: Vec<Expr>, span: Span },
    Sum { terms: Vec<Expr>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Scalar { span, .. }
            | Expr::Generator { span, .. }
            | Expr::Product { span, .. }
            | Expr::Sum { span, .. } => *span,
        }
    }

    fn names<'a>(&'a self, out: &mut Vec<(&'a str, Span)>) {
        match self {
            Expr::Scalar { .. } => {}
            Expr::Generator { name, span, .. } => out.push((name, *span)),
            Expr::Product { factors: xs, .. } | Expr::Sum { terms: xs, .. } => xs.iter().for_each(|x| x.names(out)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Scalar { value, .. } => write!(f, "({}{:+}i)", value.re, value.im),
            Expr::Generator { name, adjoint, .. } => write!(f, "W({name}){}", if *adjoint { "*" } else { "" }),
            Expr::Product { factors, .. } => {
                let parts: Vec<String> = factors.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(" * "))
            }
            Expr::Sum { terms, .. } => {
                let parts: Vec<String> = terms.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(" + "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, imag: bool },
    Gen { name: String, adjoint: bool },
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
}

fn syntax(message: impl Into<String>, start: usize, end: usize) -> WordError {
    WordError::Syntax { message: message.into(), span: Span { start, end } }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        let start = i;
        match ch {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '(' => out.push((Tok::LParen, Span { start, end: i + 1 })),
            ')' => out.push((Tok::RParen, Span { start, end: i + 1 })),
            '*' => out.push((Tok::Star, Span { start, end: i + 1 })),
            '+' => out.push((Tok::Plus, Span { start, end: i + 1 })),
            '-' => out.push((Tok::Minus, Span { start, end: i + 1 })),
            'i' => out.push((Tok::Num { value: 1.0, imag: true }, Span { start, end: i + 1 })),
            'W' => {
                let mut j = i + 1;
                if bytes.get(j) != Some(&b'(') {
                    return Err(syntax("expected `(` after `W`", start, j));
                }
                j += 1;
                while bytes.get(j).is_some_and(|b| b.is_ascii_whitespace()) {
                    j += 1;
                }
                let name_start = j;
                while bytes.get(j).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_') {
                    j += 1;
                }
                if j == name_start || !(bytes[name_start] as char).is_ascii_alphabetic() && bytes[name_start] != b'_' {
                    return Err(syntax("expected identifier inside `W( )`", name_start, j.max(name_start + 1)));
                }
                let name = text[name_start..j].to_string();
                while bytes.get(j).is_some_and(|b| b.is_ascii_whitespace()) {
                    j += 1;
                }
                if bytes.get(j) != Some(&b')') {
                    return Err(syntax("expected `)` to close generator", j, j + 1));
                }
                j += 1;
                let adjoint = bytes.get(j) == Some(&b'*');
                if adjoint {
                    j += 1;
                }
                out.push((Tok::Gen { name, adjoint }, Span { start, end: j }));
                i = j;
                continue;
            }
            c0 if c0.is_ascii_digit() || c0 == '.' => {
                let mut j = i;
                while bytes.get(j).is_some_and(|b| b.is_ascii_digit() || *b == b'.') {
                    j += 1;
                }
                if bytes.get(j).is_some_and(|b| *b == b'e' || *b == b'E') {
                    let mut k = j + 1;
                    if bytes.get(k).is_some_and(|b| *b == b'+' || *b == b'-') {
                        k += 1;
                    }
                    if bytes.get(k).is_some_and(|b| b.is_ascii_digit()) {
                        while bytes.get(k).is_some_and(|b| b.is_ascii_digit()) {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let value: f64 = text[i..j].parse().map_err(|_| syntax("malformed number", i, j))?;
                let imag = bytes.get(j) == Some(&b'i');
                if imag {
                    j += 1;
                }
                out.push((Tok::Num { value, imag }, Span { start, end: j }));
                i = j;
                continue;
            }
            other => return Err(syntax(format!("unexpected character `{other}`"), start, start + other.len_utf8())),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn span_here(&self) -> Span {
        self.toks.get(self.pos).map_or(Span { start: self.len, end: self.len }, |(_, s)| *s)
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos - 1].1.end
    }

    fn expr(&mut self) -> Result<Expr> {
        let start = self.span_here().start;
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    let s = self.span_here();
                    self.pos += 1;
                    let t = self.term()?;
                    let span = Span { start: s.start, end: t.span().end };
                    terms.push(Expr::Product { factors: vec![Expr::Scalar { value: c(-1.0, 0.0), span: s }, t], span });
                }
                _ => break,
            }
        }
        let span = Span { start, end: self.prev_end() };
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum { terms, span } })
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num { .. } | Tok::Gen { .. } | Tok::LParen))
    }

    fn term(&mut self) -> Result<Expr> {
        let start = self.span_here().start;
        let mut factors = vec![self.factor()?];
        loop {
            if self.peek() == Some(&Tok::Star) {
                self.pos += 1;
                factors.push(self.factor()?);
            } else if self.starts_factor() {
                factors.push(self.factor()?);
            } else {
                break;
            }
        }
        let span = Span { start, end: self.prev_end() };
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Product { factors, span } })
    }

    fn factor(&mut self) -> Result<Expr> {
        let here = self.span_here();
        match self.toks.get(self.pos).cloned() {
            Some((Tok::Minus, s)) => {
                self.pos += 1;
                let inner = self.factor()?;
                let span = Span { start: s.start, end: inner.span().end };
                Ok(match inner {
                    Expr::Scalar { value, .. } => Expr::Scalar { value: -value, span },
                    other => Expr::Product { factors: vec![Expr::Scalar { value: c(-1.0, 0.0), span: s }, other], span },
                })
            }
            Some((Tok::Num { value, imag }, span)) => {
                self.pos += 1;
                let value = if imag { c(0.0, value) } else { c(value, 0.0) };
                Ok(Expr::Scalar { value, span })
            }
            Some((Tok::Gen { name, adjoint }, span)) => {
                self.pos += 1;
                Ok(Expr::Generator { name, adjoint, span })
            }
            Some((Tok::LParen, s)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.toks.get(self.pos) {
                    Some((Tok::RParen, e)) => {
                        let e = *e;
                        self.pos += 1;
                        Ok(match inner {
                            Expr::Scalar { value, .. } => Expr::Scalar { value, span: Span { start: s.start, end: e.end } },
                            other => other,
                        })
                    }
                    _ => Err(syntax("expected `)`", self.span_here().start, self.span_here().end)),
                }
            }
            Some((tok, span)) => Err(syntax(format!("unexpected token {tok:?}"), span.start, span.end)),
            None => Err(syntax("unexpected end of input", here.start, here.end)),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(syntax("empty word", 0, 0));
    }
    let mut p = Parser { toks, pos: 0, len: text.len() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        let s = p.span_here();
        return Err(syntax("trailing input", s.start, s.end));
    }
    Ok(e)
}

/// Names bound to step functions in `C^{bins*d}`.
pub type Env = HashMap<String, CVec>;

/// A parsed word whose identifiers are all bound with consistent dimension.
#[derive(Debug, Clone)]
pub struct WeylWord {
    pub expr: Expr,
    pub env: Env,
    pub dim: usize,
}

pub fn bind(expr: Expr, env: &Env, dim: usize) -> Result<WeylWord> {
    let mut names = Vec::new();
    expr.names(&mut names);
    let mut used = Env::new();
    for (name, span) in names {
        let v = env.get(name).ok_or_else(|| WordError::Unbound { name: name.to_string(), span })?;
        if v.len() != dim {
            return Err(WordError::Dimension { name: name.to_string(), expected: dim, got: v.len() });
        }
        used.insert(name.to_string(), v.clone());
    }
    Ok(WeylWord { expr, env: used, dim })
}

/// Linear combination `sum c_k w_{v_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub terms: Vec<(Complex64, CVec)>,
}

/// Symplectic form `Im <u, v>` on step functions.
pub fn sigma_form(u: &CVec, v: &CVec) -> f64 {
    u.dotc(v).im
}

impl NormalForm {
    pub fn scalar(value: Complex64, dim: usize) -> Self {
        Self { terms: vec![(value, CVec::zeros(dim))] }
    }

    pub fn generator(v: CVec) -> Self {
        Self { terms: vec![(c(1.0, 0.0), v)] }
    }

    /// `w_u w_v = exp(-i sigma(u, v)) w_{u+v}` extended bilinearly.
    pub fn product(&self, other: &NormalForm) -> NormalForm {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, u) in &self.terms {
            for (b, v) in &other.terms {
                let phase = Complex64::from_polar(1.0, -sigma_form(u, v));
                terms.push((a * b * phase, u + v));
            }
        }
        NormalForm { terms }.dedup()
    }

    /// `(c w_u)* = conj(c) w_{-u}`.
    pub fn adjoint(&self) -> NormalForm {
        NormalForm { terms: self.terms.iter().map(|(a, u)| (a.conj(), -u)).collect() }
    }

    pub fn sum(&self, other: &NormalForm) -> NormalForm {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        NormalForm { terms }.dedup()
    }

    fn dedup(self) -> NormalForm {
        let mut out: Vec<(Complex64, CVec)> = Vec::new();
        for (a, u) in self.terms {
            match out.iter_mut().find(|(_, v)| (v - &u).iter().all(|z| z.norm() <= DEDUP_TOL)) {
                Some(slot) => slot.0 += a,
                None => out.push((a, u)),
            }
        }
        NormalForm { terms: out }
    }

    pub fn max_diff(&self, other: &NormalForm) -> f64 {
        let diff = self.sum(&NormalForm { terms: other.terms.iter().map(|(a, u)| (-a, u.clone())).collect() });
        diff.terms.iter().fold(0.0_f64, |m, (a, _)| m.max(a.norm()))
    }
}

pub fn normalize(word: &WeylWord) -> NormalForm {
    normalize_expr(&word.expr, &word.env, word.dim)
}

fn normalize_expr(e: &Expr, env: &Env, dim: usize) -> NormalForm {
    match e {
        Expr::Scalar { value, .. } => NormalForm::scalar(*value, dim),
        Expr::Generator { name, adjoint, .. } => {
            let g = NormalForm::generator(env[name].clone());
            if *adjoint {
                g.adjoint()
            } else {
                g
            }
        }
        Expr::Product { factors, .. } => factors
            .iter()
            .fold(NormalForm::scalar(c(1.0, 0.0), dim), |acc, f| acc.product(&normalize_expr(f, env, dim))),
        Expr::Sum { terms, .. } => terms
            .iter()
            .fold(NormalForm { terms: Vec::new() }, |acc, t| acc.sum(&normalize_expr(t, env, dim))),
    }
}

/// `sum c_k exp(-|Sigma iota(v_k)|^2 / 2)`.
pub fn expect_exact(nf: &NormalForm, sigma: &SigmaMap) -> Complex64 {
    nf.terms.iter().map(|(a, v)| a * (-0.5 * sigma.apply_iota(v).norm_squared()).exp()).sum()
}

/// One expanded product: scalar and ordered generators `(vector, adjoint)`.
#[derive(Debug, Clone)]
struct Monomial {
    coef: Complex64,
    factors: Vec<(CVec, bool)>,
}

fn expand(e: &Expr, env: &Env) -> Vec<Monomial> {
    match e {
        Expr::Scalar { value, .. } => vec![Monomial { coef: *value, factors: Vec::new() }],
        Expr::Generator { name, adjoint, .. } => {
            vec![Monomial { coef: c(1.0, 0.0), factors: vec![(env[name].clone(), *adjoint)] }]
        }
        Expr::Product { factors, .. } => {
            factors.iter().fold(vec![Monomial { coef: c(1.0, 0.0), factors: Vec::new() }], |acc, f| {
                let rhs = expand(f, env);
                let mut out = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let mut fs = a.factors.clone();
                        fs.extend(b.factors.iter().cloned());
                        out.push(Monomial { coef: a.coef * b.coef, factors: fs });
                    }
                }
                out
            })
        }
        Expr::Sum { terms, .. } => terms.iter().flat_map(|t| expand(t, env)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedExpectation {
    pub truncated: Complex64,
    pub exact: Complex64,
    pub diff: f64,
    pub warning: Option<String>,
}

/// Applies the word's truncated Weyl operators to the vacuum and compares
/// `<Omega, w Omega>` with the exact value.
pub fn expect_truncated(word: &WeylWord, sigma: &SigmaMap, fock: &TruncatedFock, budget: f64) -> TruncatedExpectation {
    let vac = fock.vacuum();
    let mut truncated = c(0.0, 0.0);
    let mut worst_load = 0.0_f64;
    for mono in expand(&word.expr, &word.env) {
        let mut x = vac.clone();
        let mut load = 0.0;
        for (v, adjoint) in mono.factors.iter().rev() {
            let mut u = sigma.apply_iota(v);
            if *adjoint {
                u = -u;
            }
            load += u.norm();
            x = fock.weyl_apply(&u, &x);
        }
        worst_load = worst_load.max(load);
        truncated += mono.coef * vac.dotc(&x);
    }
    let exact = expect_exact(&normalize(word), sigma);
    let warning = (worst_load > budget).then(|| {
        format!("argument norm {worst_load:.3} exceeds truncation budget {budget:.3}; expect truncation error")
    });
    TruncatedExpectation { truncated, exact, diff: (truncated - exact).norm(), warning }
}

/// Multiplies every bound vector by `exp(i theta)`.
pub fn rotate_env(env: &Env, theta: f64) -> Env {
    let z = Complex64::from_polar(1.0, theta);
    env.iter().map(|(k, v)| (k.clone(), v * z)).collect()
}

/// Random product of `1..=max_len` generators drawn from `names`, each
/// possibly adjointed.
pub fn random_word_text<R: Rng + ?Sized>(rng: &mut R, names: &[String], max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| {
            let name = &names[rng.gen_range(0..names.len())];
            if rng.gen_bool(0.5) {
                format!("W({name})*")
            } else {
                format!("W({name})")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{build_sigma_gauge, build_sigma_squeezed, scalar_t, PhaseSpaceModel, SqueezeParams, Strictness};

    fn gauge1() -> SigmaMap {
        build_sigma_gauge(PhaseSpaceModel::new(1, 1), &[scalar_t(1, 1.0)], Strictness::Strict).unwrap()
    }

    fn env(pairs: &[(&str, Complex64)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), CVec::from_vec(vec![*v]))).collect()
    }

    fn gen_names(e: &Expr) -> Vec<(String, bool)> {
        match e {
            Expr::Generator { name, adjoint, .. } => vec![(name.clone(), *adjoint)],
            Expr::Product { factors: xs, .. } | Expr::Sum { terms: xs, .. } => xs.iter().flat_map(gen_names).collect(),
            Expr::Scalar { .. } => vec![],
        }
    }

    #[test]
    fn parse_product() {
        let e = parse("W(f) * W(g)").unwrap();
        assert!(matches!(&e, Expr::Product { factors, .. } if factors.len() == 2));
        assert_eq!(gen_names(&e), vec![("f".into(), false), ("g".into(), false)]);
    }

    #[test]
    fn parse_adjoint() {
        assert!(matches!(parse("W(f)*").unwrap(), Expr::Generator { adjoint: true, .. }));
        let e = parse("W(f)*W(f)").unwrap();
        assert_eq!(gen_names(&e), vec![("f".into(), true), ("f".into(), false)]);
    }

    #[test]
    fn parse_scaled_sum() {
        let e = parse("2i * W(f) + W(g)").unwrap();
        let Expr::Sum { terms, .. } = &e else { panic!("expected sum") };
        assert_eq!(terms.len(), 2);
        let Expr::Product { factors, .. } = &terms[0] else { panic!("expected scaled term") };
        assert!(matches!(factors[0], Expr::Scalar { value, .. } if value == c(0.0, 2.0)));
        assert!(matches!(&terms[1], Expr::Generator { name, .. } if name == "g"));
    }

    #[test]
    fn parse_errors_have_positions() {
        let err = parse("W(f) + ").unwrap_err();
        assert!(matches!(err, WordError::Syntax { span: Span { start: 7, .. }, .. }));
        let err = parse("W(f) $ W(g)").unwrap_err();
        assert!(matches!(err, WordError::Syntax { span: Span { start: 5, end: 6 }, .. }));
        assert!(parse("W f").is_err());
        assert!(parse("(W(f)").is_err());
    }

    #[test]
    fn bind_reports_unbound() {
        let e = parse("W(f) W(h)").unwrap();
        let err = bind(e, &env(&[("f", c(1.0, 0.0))]), 1).unwrap_err();
        assert_eq!(err, WordError::Unbound { name: "h".into(), span: Span { start: 5, end: 9 } });
    }

    #[test]
    fn normalize_inverse_pair() {
        let w = bind(parse("W(u) W(v)").unwrap(), &env(&[("u", c(0.7, 0.2)), ("v", c(-0.7, -0.2))]), 1).unwrap();
        let nf = normalize(&w);
        assert_eq!(nf.terms.len(), 1);
        assert!((nf.terms[0].0 - c(1.0, 0.0)).norm() < 1e-15);
        assert!(nf.terms[0].1.norm() < 1e-15);
    }

    #[test]
    fn normalize_phase_example() {
        let w = bind(parse("W(u) * W(v)").unwrap(), &env(&[("u", c(1.0, 0.0)), ("v", c(0.0, 1.0))]), 1).unwrap();
        let nf = normalize(&w);
        assert!((nf.terms[0].0 - Complex64::from_polar(1.0, -1.0)).norm() < 1e-15);
        assert_eq!(nf.terms[0].1, CVec::from_vec(vec![c(1.0, 1.0)]));
    }

    #[test]
    fn normalize_triple() {
        let e = env(&[("u", c(0.3, 0.1)), ("v", c(-0.2, 0.5)), ("w", c(-0.1, -0.6))]);
        let nf = normalize(&bind(parse("W(u) W(v) W(w)").unwrap(), &e, 1).unwrap());
        let s = sigma_form(&e["u"], &e["v"]);
        assert!((nf.terms[0].0 - Complex64::from_polar(1.0, -s)).norm() < 1e-15);
        assert!(nf.terms[0].1.norm() < 1e-15);
    }

    #[test]
    fn adjoint_word_is_unit() {
        let e = env(&[("f", c(0.3, -0.2))]);
        let nf = normalize(&bind(parse("W(f)*W(f)").unwrap(), &e, 1).unwrap());
        assert!(nf.max_diff(&NormalForm::scalar(c(1.0, 0.0), 1)) < 1e-15);
    }

    #[test]
    fn homomorphism_properties() {
        let e = env(&[("a", c(0.3, -0.2)), ("b", c(-0.5, 0.1)), ("g", c(0.2, 0.2))]);
        let w1 = bind(parse("(1+2i) W(a) + W(b)*").unwrap(), &e, 1).unwrap();
        let w2 = bind(parse("W(g) W(a)* - 0.5").unwrap(), &e, 1).unwrap();
        let joint = bind(parse("((1+2i) W(a) + W(b)*) * (W(g) W(a)* - 0.5)").unwrap(), &e, 1).unwrap();
        assert!(normalize(&joint).max_diff(&normalize(&w1).product(&normalize(&w2))) < 1e-14);

        let adj = bind(parse("((1-2i) W(a)* + W(b))").unwrap(), &e, 1).unwrap();
        assert!(normalize(&adj).max_diff(&normalize(&w1).adjoint()) < 1e-14);
    }

    #[test]
    fn exact_expectations() {
        let sigma = gauge1();
        let e = env(&[("v", c(1.0, 0.0)), ("u", c(0.4, 0.9))]);
        assert_eq!(expect_exact(&NormalForm::scalar(c(1.0, 0.0), 1), &sigma), c(1.0, 0.0));
        let nf = normalize(&bind(parse("W(v)").unwrap(), &e, 1).unwrap());
        assert!((expect_exact(&nf, &sigma) - c((-1.5f64).exp(), 0.0)).norm() < 1e-15);
        let nf = normalize(&bind(parse("W(u) W(u)*").unwrap(), &e, 1).unwrap());
        assert!((expect_exact(&nf, &sigma) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn truncated_expectations() {
        let sigma = gauge1();
        let fock = TruncatedFock::new(2, 12);
        let scale = 0.3 / 3f64.sqrt();
        let e = env(&[("f", c(scale, 0.0))]);
        let r = expect_truncated(&bind(parse("W(f)").unwrap(), &e, 1).unwrap(), &sigma, &fock, DEFAULT_BUDGET);
        assert!(r.diff <= 1e-8);
        assert!(r.warning.is_none());
        let r = expect_truncated(&bind(parse("W(f)*W(f)").unwrap(), &e, 1).unwrap(), &sigma, &fock, DEFAULT_BUDGET);
        assert!((r.truncated - c(1.0, 0.0)).norm() <= 1e-8);
        assert!(r.diff <= 1e-8);
    }

    #[test]
    fn budget_warning() {
        let sigma = gauge1();
        let fock = TruncatedFock::new(2, 6);
        let e = env(&[("f", c(1.0, 0.0))]);
        let r = expect_truncated(&bind(parse("W(f) W(f)").unwrap(), &e, 1).unwrap(), &sigma, &fock, DEFAULT_BUDGET);
        assert!(r.warning.is_some());
    }

    #[test]
    fn gauge_invariance_and_violation() {
        let e = env(&[("a", c(0.3, -0.2)), ("b", c(-0.5, 0.1))]);
        let text = "W(a) W(b)* + 2 W(b)";
        let gauge = gauge1();
        let sq = build_sigma_squeezed(
            PhaseSpaceModel::new(1, 1),
            &[scalar_t(1, 1.0)],
            &[SqueezeParams::real_squeeze(1, 0.5)],
            Strictness::Strict,
        )
        .unwrap();
        let base = normalize(&bind(parse(text).unwrap(), &e, 1).unwrap());
        let rotated = normalize(&bind(parse(text).unwrap(), &rotate_env(&e, 0.9), 1).unwrap());
        assert!((expect_exact(&base, &gauge) - expect_exact(&rotated, &gauge)).norm() < 1e-12);
        assert!((expect_exact(&base, &sq) - expect_exact(&rotated, &sq)).norm() > 1e-3);
    }
}
