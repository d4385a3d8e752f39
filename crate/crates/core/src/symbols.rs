//! Bounded analytic symbols on the left half-plane and their kernels.
//!
//! Atoms are `c/(α − s)` with `Re α > 0`, delays `e^{sτ}` with `τ ≥ 0` and
//! constants. Every symbol in this class is the Laplace-type transform
//! `g(λ) = ∫₀^∞ e^{λt} h(−t) dt` of a kernel made of (shifted, polynomially
//! weighted) decaying exponentials plus point masses; see [`KernelRep`].

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{c, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    pub c: Complex64,
    pub alpha: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolExpr {
    Constant(Complex64),
    /// `Σ c_k/(α_k − s)`.
    RationalPf(Vec<PoleTerm>),
    /// `e^{sτ}`.
    Delay(f64),
    Sum(Vec<SymbolExpr>),
    Product(Vec<SymbolExpr>),
    Scale(Complex64, Box<SymbolExpr>),
}

impl SymbolExpr {
    pub fn constant(d: f64) -> Self {
        Self::Constant(c(d, 0.0))
    }

    /// `1/(α − s)`.
    pub fn pole(alpha: f64) -> Self {
        Self::RationalPf(vec![PoleTerm { c: ONE, alpha: c(alpha, 0.0) }])
    }

    pub fn rational(terms: Vec<PoleTerm>) -> Self {
        Self::RationalPf(terms)
    }

    pub fn delay(tau: f64) -> Self {
        Self::Delay(tau)
    }

    pub fn scale(k: Complex64, g: SymbolExpr) -> Self {
        Self::Scale(k, Box::new(g))
    }

    /// Checks the class invariants: poles strictly right of the axis,
    /// delays finite and non-negative, coefficients finite.
    pub fn validate(&self) -> Result<()> {
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        match self {
            Self::Constant(d) if !finite(d) => {
                Err(Error::InvalidSymbol("non-finite constant".into()))
            }
            Self::Constant(_) => Ok(()),
            Self::RationalPf(terms) => {
                if terms.is_empty() {
                    return Err(Error::InvalidSymbol("empty rational term list".into()));
                }
                for t in terms {
                    if !finite(&t.c) || !finite(&t.alpha) {
                        return Err(Error::InvalidSymbol("non-finite rational term".into()));
                    }
                    if !(t.alpha.re > 0.0) {
                        return Err(Error::InvalidSymbol(format!(
                            "pole {} is not in the open right half-plane",
                            t.alpha
                        )));
                    }
                }
                Ok(())
            }
            Self::Delay(tau) if !(tau.is_finite() && *tau >= 0.0) => {
                Err(Error::InvalidSymbol(format!("delay {tau} must be finite and ≥ 0")))
            }
            Self::Delay(_) => Ok(()),
            Self::Sum(parts) | Self::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidSymbol("empty sum or product".into()));
                }
                parts.iter().try_for_each(|p| p.validate())
            }
            Self::Scale(k, g) => {
                if !finite(k) {
                    return Err(Error::InvalidSymbol("non-finite scale".into()));
                }
                g.validate()
            }
        }
    }

    /// `g(s)` for `Re s ≤ 0`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        match self {
            Self::Constant(d) => *d,
            Self::RationalPf(terms) => terms.iter().map(|t| t.c / (t.alpha - s)).sum(),
            Self::Delay(tau) => (s * *tau).exp(),
            Self::Sum(parts) => parts.iter().map(|p| p.eval(s)).sum(),
            Self::Product(parts) => parts.iter().map(|p| p.eval(s)).product(),
            Self::Scale(k, g) => k * g.eval(s),
        }
    }

    pub fn contains_delay(&self) -> bool {
        match self {
            Self::Delay(_) => true,
            Self::Constant(_) | Self::RationalPf(_) => false,
            Self::Sum(p) | Self::Product(p) => p.iter().any(|q| q.contains_delay()),
            Self::Scale(_, g) => g.contains_delay(),
        }
    }
}

/// `g(iω)`.
pub fn eval_boundary(g: &SymbolExpr, omega: f64) -> Complex64 {
    g.eval(c(0.0, omega))
}

pub fn multiply(g1: &SymbolExpr, g2: &SymbolExpr) -> SymbolExpr {
    SymbolExpr::Product(vec![g1.clone(), g2.clone()])
}

pub fn add(g1: &SymbolExpr, g2: &SymbolExpr) -> SymbolExpr {
    SymbolExpr::Sum(vec![g1.clone(), g2.clone()])
}

// ---------------------------------------------------------------------------
// Supremum norm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub value: f64,
    /// Frequency of the maximizer.
    pub omega: f64,
    /// Gain of the refinement over the raw grid maximum.
    pub refinement: f64,
}

const HINF_GRID: usize = 2048;
const HINF_OMEGA_MAX: f64 = 1e6;
const HINF_OMEGA_MIN: f64 = 1e-4;
const HINF_REFINE: usize = 8;

fn hinf_grid() -> Vec<f64> {
    // 0, then ±logspace(1e-4, 1e6) filling the remaining points.
    let half = (HINF_GRID - 1) / 2;
    let (lo, hi) = (HINF_OMEGA_MIN.log10(), HINF_OMEGA_MAX.log10());
    let pos: Vec<f64> =
        (0..half).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (half - 1) as f64)).collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    grid.push(0.0);
    grid.extend(pos);
    grid
}

pub fn hinf_norm_detail(g: &SymbolExpr) -> HinfNorm {
    let grid = hinf_grid();
    let vals: Vec<f64> = grid.iter().map(|&w| eval_boundary(g, w).norm()).collect();
    let (imax, &grid_max) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");

    let mut peaks: Vec<usize> = (0..vals.len())
        .filter(|&k| {
            let left = k == 0 || vals[k - 1] <= vals[k];
            let right = k + 1 == vals.len() || vals[k + 1] <= vals[k];
            left && right
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    peaks.truncate(HINF_REFINE);

    let mut best = (grid_max, grid[imax]);
    for k in peaks {
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(grid.len() - 1)];
        let (w, v) = golden_max(|w| eval_boundary(g, w).norm(), a, b);
        if v > best.0 {
            best = (v, w);
        }
    }
    HinfNorm { value: best.0, omega: best.1, refinement: best.0 - grid_max }
}

/// `sup_ω |g(iω)|` by log-grid sampling and golden-section refinement.
pub fn hinf_norm(g: &SymbolExpr) -> f64 {
    hinf_norm_detail(g).value
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    let candidates = [(a, f(a)), (x1, f1), (x2, f2), (b, f(b))];
    let best = candidates.iter().copied().max_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
    (best.0, best.1)
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// `c (t−τ)^{p−1}/(p−1)! e^{−α(t−τ)}` for `t > τ`; transform
/// `c e^{sτ}/(α − s)^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMode {
    pub c: Complex64,
    pub alpha: Complex64,
    pub power: u32,
    pub shift: f64,
}

/// Point mass `weight·δ(t − τ)`; transform `weight·e^{sτ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub weight: Complex64,
    pub tau: f64,
}

/// `h(−t) = Σ modes + Σ point masses + constant·δ(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelRep {
    pub modes: Vec<KernelMode>,
    pub delays: Vec<PointMass>,
    pub constant: Complex64,
}

impl KernelRep {
    fn scaled(mut self, k: Complex64) -> Self {
        self.modes.iter_mut().for_each(|m| m.c *= k);
        self.delays.iter_mut().for_each(|d| d.weight *= k);
        self.constant *= k;
        self
    }

    fn push_point(&mut self, weight: Complex64, tau: f64) {
        if tau == 0.0 {
            self.constant += weight;
        } else {
            self.delays.push(PointMass { weight, tau });
        }
    }

    fn extend(&mut self, other: KernelRep) {
        self.modes.extend(other.modes);
        self.delays.extend(other.delays);
        self.constant += other.constant;
    }

    /// Merges terms with identical support and drops exact zeros.
    fn normalized(self) -> Self {
        let mut modes: Vec<KernelMode> = Vec::new();
        for m in self.modes {
            match modes
                .iter_mut()
                .find(|q| q.alpha == m.alpha && q.power == m.power && q.shift == m.shift)
            {
                Some(q) => q.c += m.c,
                None => modes.push(m),
            }
        }
        modes.retain(|m| m.c != ZERO);
        let mut delays: Vec<PointMass> = Vec::new();
        for d in self.delays {
            match delays.iter_mut().find(|q| q.tau == d.tau) {
                Some(q) => q.weight += d.weight,
                None => delays.push(d),
            }
        }
        delays.retain(|d| d.weight != ZERO);
        Self { modes, delays, constant: self.constant }
    }

    /// Transform `∫₀^∞ e^{λt} h(−t) dt` in closed form.
    pub fn transform(&self, lambda: Complex64) -> Complex64 {
        let modes: Complex64 = self
            .modes
            .iter()
            .map(|m| m.c * (lambda * m.shift).exp() / (m.alpha - lambda).powu(m.power))
            .sum();
        let points: Complex64 =
            self.delays.iter().map(|d| d.weight * (lambda * d.tau).exp()).sum();
        modes + points + self.constant
    }

    /// `∫₀^∞ |h(−t)| dt` including point masses, an upper bound for `‖g‖∞`.
    pub fn total_variation(&self) -> f64 {
        let modes: f64 =
            self.modes.iter().map(|m| m.c.norm() / m.alpha.re.powi(m.power as i32)).sum();
        let points: f64 = self.delays.iter().map(|d| d.weight.norm()).sum();
        modes + points + self.constant.norm()
    }

    /// Smallest decay rate among the modes.
    pub fn slowest_rate(&self) -> Option<f64> {
        self.modes.iter().map(|m| m.alpha.re).min_by(f64::total_cmp)
    }
}

enum Term {
    Point(Complex64, f64),
    Mode(KernelMode),
}

fn terms(k: &KernelRep) -> Vec<Term> {
    let mut out = Vec::new();
    if k.constant != ZERO {
        out.push(Term::Point(k.constant, 0.0));
    }
    out.extend(k.delays.iter().map(|d| Term::Point(d.weight, d.tau)));
    out.extend(k.modes.iter().map(|m| Term::Mode(*m)));
    out
}

/// Partial fractions of `1/((a−s)^p (b−s)^q)` as `(coef, pole, power)`.
fn pair_fractions(a: Complex64, p: u32, b: Complex64, q: u32) -> Vec<(Complex64, Complex64, u32)> {
    if p == 0 {
        return vec![(ONE, b, q)];
    }
    if q == 0 {
        return vec![(ONE, a, p)];
    }
    if a == b {
        return vec![(ONE, a, p + q)];
    }
    // 1/((a−s)(b−s)) = (1/(b−a))·(1/(a−s) − 1/(b−s))
    let k = ONE / (b - a);
    let mut out: Vec<(Complex64, Complex64, u32)> = pair_fractions(a, p, b, q - 1)
        .into_iter()
        .map(|(cf, pole, pw)| (cf * k, pole, pw))
        .collect();
    out.extend(pair_fractions(a, p - 1, b, q).into_iter().map(|(cf, pole, pw)| (-cf * k, pole, pw)));
    out
}

fn multiply_kernels(x: &KernelRep, y: &KernelRep) -> KernelRep {
    let mut out = KernelRep::default();
    for tx in terms(x) {
        for ty in terms(y) {
            match (&tx, &ty) {
                (Term::Point(w1, t1), Term::Point(w2, t2)) => out.push_point(w1 * w2, t1 + t2),
                (Term::Point(w, t), Term::Mode(m)) | (Term::Mode(m), Term::Point(w, t)) => {
                    out.modes.push(KernelMode { c: m.c * w, shift: m.shift + t, ..*m })
                }
                (Term::Mode(m1), Term::Mode(m2)) => {
                    let shift = m1.shift + m2.shift;
                    for (cf, alpha, power) in pair_fractions(m1.alpha, m1.power, m2.alpha, m2.power) {
                        out.modes.push(KernelMode { c: m1.c * m2.c * cf, alpha, power, shift });
                    }
                }
            }
        }
    }
    out.normalized()
}

/// The kernel of `g`, in closed form.
pub fn kernel(g: &SymbolExpr) -> Result<KernelRep> {
    g.validate()?;
    Ok(kernel_unchecked(g))
}

fn kernel_unchecked(g: &SymbolExpr) -> KernelRep {
    match g {
        SymbolExpr::Constant(d) => KernelRep { constant: *d, ..Default::default() },
        SymbolExpr::RationalPf(ts) => KernelRep {
            modes: ts
                .iter()
                .map(|t| KernelMode { c: t.c, alpha: t.alpha, power: 1, shift: 0.0 })
                .collect(),
            ..Default::default()
        }
        .normalized(),
        SymbolExpr::Delay(tau) => {
            let mut k = KernelRep::default();
            k.push_point(ONE, *tau);
            k
        }
        SymbolExpr::Sum(parts) => {
            let mut k = KernelRep::default();
            for p in parts {
                k.extend(kernel_unchecked(p));
            }
            k.normalized()
        }
        SymbolExpr::Product(parts) => {
            let mut k = KernelRep { constant: ONE, ..Default::default() };
            for p in parts {
                k = multiply_kernels(&k, &kernel_unchecked(p));
            }
            k
        }
        SymbolExpr::Scale(s, inner) => kernel_unchecked(inner).scaled(*s),
    }
}

// ---------------------------------------------------------------------------
// Display (round-trips through the parser)
// ---------------------------------------------------------------------------

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("({})", z.re)
    } else {
        format!("({}+{}*i)", z.re, z.im)
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(d) => write!(f, "{}", fmt_complex(*d)),
            Self::RationalPf(ts) => {
                let parts: Vec<String> = ts
                    .iter()
                    .map(|t| format!("{}/({}-s)", fmt_complex(t.c), fmt_complex(t.alpha)))
                    .collect();
                write!(f, "({})", parts.join("+"))
            }
            Self::Delay(tau) => write!(f, "exp({tau}*s)"),
            Self::Sum(ps) => {
                let parts: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                write!(f, "({})", parts.join("+"))
            }
            Self::Product(ps) => {
                let parts: Vec<String> = ps.iter().map(|p| format!("({p})")).collect();
                write!(f, "{}", parts.join("*"))
            }
            Self::Scale(k, g) => write!(f, "{}*({})", fmt_complex(*k), g),
        }
    }
}

// ---------------------------------------------------------------------------
// DSL parser
// ---------------------------------------------------------------------------
//
// expr   := term (('+' | '-') term)*
// term   := unary (('*' | '/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' integer)?
// atom   := number | 's' | 'i' | 'exp' '(' expr ')' | '(' expr ')'
//
// Polynomials in `s` are kept as coefficient lists until they are divided
// into; a bounded symbol results only from proper (or constant-quotient)
// division by a polynomial of degree ≤ 2 with roots in Re > 0.

#[derive(Debug, Clone)]
enum Val {
    Poly(Vec<Complex64>),
    Sym(SymbolExpr),
}

fn trim(mut p: Vec<Complex64>) -> Vec<Complex64> {
    while p.len() > 1 && *p.last().unwrap() == ZERO {
        p.pop();
    }
    if p.is_empty() {
        p.push(ZERO);
    }
    p
}

fn poly_add(a: &[Complex64], b: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    trim(
        (0..n)
            .map(|k| {
                a.get(k).copied().unwrap_or(ZERO) + b.get(k).copied().unwrap_or(ZERO) * sign
            })
            .collect(),
    )
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

fn poly_eval(p: &[Complex64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(ZERO, |acc, k| acc * s + k)
}

fn poly_deriv(p: &[Complex64]) -> Vec<Complex64> {
    if p.len() <= 1 {
        return vec![ZERO];
    }
    trim(p.iter().enumerate().skip(1).map(|(k, z)| z * k as f64).collect())
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", ch as char))
        }
    }

    fn expr(&mut self) -> Result<Val> {
        let mut acc = self.term()?;
        loop {
            let start = self.pos;
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = self.combine_add(acc, rhs, 1.0, start)?;
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = self.combine_add(acc, rhs, -1.0, start)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Val> {
        let mut acc = self.unary()?;
        loop {
            let start = self.pos;
            if self.eat(b'*') {
                let rhs = self.unary()?;
                acc = mul_vals(acc, rhs).map_err(|e| relocate(e, start))?;
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                acc = div_vals(acc, rhs).map_err(|e| relocate(e, start))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Val> {
        if self.eat(b'-') {
            let v = self.unary()?;
            return mul_vals(Val::Poly(vec![c(-1.0, 0.0)]), v);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Val> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let n: u32 = match text.parse() {
            Ok(n) if (1..=16).contains(&n) => n,
            _ => return self.err("exponent must be an integer in 1..=16"),
        };
        let mut acc = base.clone();
        for _ in 1..n {
            acc = mul_vals(acc, base.clone())?;
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Val> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(b')')?;
                Ok(v)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                match &self.src[start..self.pos] {
                    b"s" => Ok(Val::Poly(vec![ZERO, ONE])),
                    b"i" => Ok(Val::Poly(vec![c(0.0, 1.0)])),
                    b"exp" => {
                        self.expect(b'(')?;
                        let arg_pos = self.pos;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        exp_val(arg).map_err(|e| relocate(e, arg_pos))
                    }
                    other => {
                        self.pos = start;
                        self.err(format!("unknown identifier '{}'", String::from_utf8_lossy(other)))
                    }
                }
            }
            Some(ch) => self.err(format!("unexpected '{}'", ch as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Val> {
        let start = self.pos;
        let s = self.src;
        let mut p = self.pos;
        while p < s.len() && (s[p].is_ascii_digit() || s[p] == b'.') {
            p += 1;
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                while q < s.len() && s[q].is_ascii_digit() {
                    q += 1;
                }
                p = q;
            }
        }
        self.pos = p;
        let text = std::str::from_utf8(&s[start..p]).unwrap();
        match text.parse::<f64>() {
            Ok(x) => Ok(Val::Poly(vec![c(x, 0.0)])),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number '{text}'"))
            }
        }
    }

    fn combine_add(&self, a: Val, b: Val, sign: f64, at: usize) -> Result<Val> {
        let minus = |v: SymbolExpr| {
            if sign < 0.0 {
                SymbolExpr::scale(c(-1.0, 0.0), v)
            } else {
                v
            }
        };
        match (a, b) {
            (Val::Poly(p), Val::Poly(q)) => Ok(Val::Poly(poly_add(&p, &q, sign))),
            (Val::Sym(x), Val::Sym(y)) => Ok(Val::Sym(SymbolExpr::Sum(vec![x, minus(y)]))),
            (Val::Poly(p), Val::Sym(y)) if p.len() == 1 => {
                Ok(Val::Sym(SymbolExpr::Sum(vec![SymbolExpr::Constant(p[0]), minus(y)])))
            }
            (Val::Sym(x), Val::Poly(q)) if q.len() == 1 => {
                Ok(Val::Sym(SymbolExpr::Sum(vec![x, SymbolExpr::Constant(q[0] * sign)])))
            }
            _ => Err(Error::Parse {
                pos: at,
                msg: "sum of a symbol and a non-constant polynomial is unbounded".into(),
            }),
        }
    }
}

fn relocate(e: Error, pos: usize) -> Error {
    match e {
        Error::InvalidSymbol(msg) | Error::Unsupported(msg) => Error::Parse { pos, msg },
        other => other,
    }
}

fn mul_vals(a: Val, b: Val) -> Result<Val> {
    match (a, b) {
        (Val::Poly(p), Val::Poly(q)) => Ok(Val::Poly(poly_mul(&p, &q))),
        (Val::Sym(x), Val::Sym(y)) => Ok(Val::Sym(SymbolExpr::Product(vec![x, y]))),
        (Val::Poly(p), Val::Sym(y)) | (Val::Sym(y), Val::Poly(p)) => {
            if p.len() == 1 {
                Ok(Val::Sym(SymbolExpr::scale(p[0], y)))
            } else {
                Err(Error::Unsupported(
                    "a symbol times a polynomial in s; write the quotient as one fraction".into(),
                ))
            }
        }
    }
}

fn div_vals(a: Val, b: Val) -> Result<Val> {
    let q = match b {
        Val::Poly(q) => q,
        Val::Sym(_) => {
            return Err(Error::Unsupported("division by a symbol is not supported".into()))
        }
    };
    if q.len() == 1 {
        if q[0] == ZERO {
            return Err(Error::InvalidSymbol("division by zero".into()));
        }
        let k = ONE / q[0];
        return Ok(match a {
            Val::Poly(p) => Val::Poly(p.iter().map(|z| z * k).collect()),
            Val::Sym(x) => Val::Sym(SymbolExpr::scale(k, x)),
        });
    }
    match a {
        Val::Poly(p) => Ok(Val::Sym(rational_from_polys(&p, &q)?)),
        Val::Sym(x) => {
            let r = rational_from_polys(&[ONE], &q)?;
            Ok(Val::Sym(SymbolExpr::Product(vec![x, r])))
        }
    }
}

fn roots(q: &[Complex64]) -> Result<Vec<Complex64>> {
    match q.len() {
        2 => Ok(vec![-q[0] / q[1]]),
        3 => {
            let (a, b, cc) = (q[2], q[1], q[0]);
            let disc = (b * b - a * cc * 4.0).sqrt();
            // Stable quadratic formula.
            let sgn = if (b.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
            let qq = (b + disc * sgn) * -0.5;
            if qq == ZERO {
                return Ok(vec![ZERO, ZERO]);
            }
            let r1 = qq / a;
            let r2 = cc / qq;
            Ok(vec![r1, r2])
        }
        _ => Err(Error::Unsupported("denominators of degree > 2 are not supported".into())),
    }
}

/// `p/q` as a symbol, `deg q ∈ {1, 2}`.
fn rational_from_polys(p: &[Complex64], q: &[Complex64]) -> Result<SymbolExpr> {
    let dq = q.len() - 1;
    let dp = p.len() - 1;
    if dp > dq {
        return Err(Error::InvalidSymbol("improper rational function is unbounded".into()));
    }
    let lead = q[dq];
    let mut parts: Vec<SymbolExpr> = Vec::new();
    let mut num = p.to_vec();
    if dp == dq {
        let k = p[dp] / lead;
        parts.push(SymbolExpr::Constant(k));
        num = poly_add(p, &q.iter().map(|z| z * k).collect::<Vec<_>>(), -1.0);
    }
    let rs = roots(q)?;
    for r in &rs {
        if !(r.re > 0.0) {
            return Err(Error::InvalidSymbol(format!(
                "pole at {r} is not in the open right half-plane"
            )));
        }
    }
    let scale = rs.iter().map(|r| r.norm()).fold(1.0, f64::max);
    let repeated = rs.len() == 2 && (rs[0] - rs[1]).norm() <= 1e-12 * scale;
    if repeated {
        // p/(lead (s−r)²) = p(r)/lead · 1/(r−s)² − p'(r)/lead · 1/(r−s)
        let r = (rs[0] + rs[1]) * 0.5;
        let n0 = poly_eval(&num, r) / lead;
        let n1 = poly_eval(&poly_deriv(&num), r) / lead;
        let atom = SymbolExpr::RationalPf(vec![PoleTerm { c: ONE, alpha: r }]);
        if n0 != ZERO {
            parts.push(SymbolExpr::scale(n0, SymbolExpr::Product(vec![atom.clone(), atom])));
        }
        if n1 != ZERO {
            parts.push(SymbolExpr::RationalPf(vec![PoleTerm { c: -n1, alpha: r }]));
        }
    } else {
        // residue of p/q at r is p(r)/q'(r); 1/(s−r) = −1/(r−s)
        let dq_poly = poly_deriv(q);
        let terms: Vec<PoleTerm> = rs
            .iter()
            .map(|&r| PoleTerm { c: -poly_eval(&num, r) / poly_eval(&dq_poly, r), alpha: r })
            .filter(|t| t.c != ZERO)
            .collect();
        if !terms.is_empty() {
            parts.push(SymbolExpr::RationalPf(terms));
        }
    }
    Ok(match parts.len() {
        0 => SymbolExpr::Constant(ZERO),
        1 => parts.pop().unwrap(),
        _ => SymbolExpr::Sum(parts),
    })
}

fn exp_val(arg: Val) -> Result<Val> {
    let p = match arg {
        Val::Poly(p) if p.len() <= 2 => p,
        _ => {
            return Err(Error::Unsupported(
                "exp() argument must be affine in s: exp(a + τ·s)".into(),
            ))
        }
    };
    let a = p[0];
    let tau = p.get(1).copied().unwrap_or(ZERO);
    if tau.im != 0.0 || tau.re < 0.0 {
        return Err(Error::InvalidSymbol("exp(τ·s) needs real τ ≥ 0".into()));
    }
    let delay = SymbolExpr::Delay(tau.re);
    Ok(Val::Sym(if a == ZERO { delay } else { SymbolExpr::scale(a.exp(), delay) }))
}

/// Parses the symbol DSL, e.g. `1/(2-s)`, `exp(0.5*s)`,
/// `0.3*(1/(1-s))*(1/(3-s))`.
pub fn parse_symbol(text: &str) -> Result<SymbolExpr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let v = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    let g = match v {
        Val::Poly(q) if q.len() == 1 => SymbolExpr::Constant(q[0]),
        Val::Poly(_) => {
            return Err(Error::Parse { pos: 0, msg: "a non-constant polynomial is unbounded".into() })
        }
        Val::Sym(g) => g,
    };
    g.validate().map_err(|e| match e {
        Error::InvalidSymbol(msg) => Error::Parse { pos: 0, msg },
        other => other,
    })?;
    Ok(g)
}

impl std::str::FromStr for SymbolExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_symbol(s)
    }
}

/// The test battery `{1/(1−s), 1/(2−s), 1/((1−s)(3−s)), e^{0.3s}, 0.7}`.
pub fn battery() -> Vec<(String, SymbolExpr)> {
    ["1/(1-s)", "1/(2-s)", "1/((1-s)*(3-s))", "exp(0.3*s)", "0.7"]
        .iter()
        .map(|t| (t.to_string(), parse_symbol(t).expect("battery symbols parse")))
        .collect()
}
