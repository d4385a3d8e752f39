//! `g(A)` by four independent routes, the output map `𝔒_g`, and the
//! functional-calculus axioms.
//!
//! * spectral: `diag(g(λ_n))`, diagonal generators only;
//! * resolvent: closed form from the kernel, `Σ c T(τ)(αI − A)^{−p} + …`;
//! * convolution: quadrature of `∫₀^∞ T(t) h(−t) dt`;
//! * toeplitz: read-off of `M_g(T(·)x₀)` at `t = 0`.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::admissibility::ObservationOperator;
use crate::error::{Error, Result};
use crate::hardy::{correlate, discrete_taps, GridSpec, SampledSignal, WRAPAROUND_GUARD};
use crate::numkernel::{c, diag, identity, inverse, mat_exp, norm_one, op_norm, ComplexMatrix, ONE};
use crate::quadrature::{integrate, poly_exp_tail, tail_horizon, PanelPlan};
use crate::semigroup::{evaluate_t, matrix_to_rows, resolvent, Generator, GeneratorKind};
use crate::symbols::{kernel, KernelMode, SymbolExpr};
use crate::verifier::CheckReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Resolvent,
    Convolution,
    Toeplitz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GAResult {
    pub matrix: ComplexMatrix,
    pub method: Method,
    pub est_error: f64,
}

impl Serialize for GAResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            matrix: Vec<Vec<[f64; 2]>>,
            method: Method,
            est_error: f64,
        }
        Doc { matrix: matrix_to_rows(&self.matrix), method: self.method, est_error: self.est_error }
            .serialize(s)
    }
}

/// Absolute tolerance on the summed halving changes of one mode integral.
const CONV_TOL: f64 = 1e-11;
/// Target for the neglected tail of one mode integral.
const TAIL_TOL: f64 = 1e-14;

pub fn ga_spectral(gen: &Generator, g: &SymbolExpr) -> Result<GAResult> {
    g.validate()?;
    let eig = gen
        .eigenvalues()
        .ok_or_else(|| Error::Unsupported("spectral route needs a diagonal generator".into()))?;
    let vals: Vec<Complex64> = eig.iter().map(|&l| g.eval(l)).collect();
    Ok(GAResult { matrix: diag(&vals), method: Method::Spectral, est_error: 0.0 })
}

/// `T(τ)`, cached for `τ = 0`.
fn t_of(gen: &Generator, tau: f64) -> Result<ComplexMatrix> {
    if tau == 0.0 {
        Ok(identity(gen.dim()))
    } else {
        evaluate_t(gen, tau)
    }
}

pub fn ga_resolvent(gen: &Generator, g: &SymbolExpr) -> Result<GAResult> {
    let k = kernel(g)?;
    let n = gen.dim();
    let mut out = identity(n).mapv(|z| z * k.constant);
    for d in &k.delays {
        out = out + t_of(gen, d.tau)?.mapv(|z| z * d.weight);
    }
    for m in &k.modes {
        let r = resolvent(gen, m.alpha)?;
        let mut pow = r.clone();
        for _ in 1..m.power {
            pow = pow.dot(&r);
        }
        let term = t_of(gen, m.shift)?.dot(&pow);
        out = out + term.mapv(|z| z * m.c);
    }
    Ok(GAResult { matrix: out, method: Method::Resolvent, est_error: 0.0 })
}

fn poly_weight(u: f64, p: u32) -> f64 {
    let fact: f64 = (1..p).map(|k| k as f64).product();
    u.powi(p as i32 - 1) / fact
}

/// `∫₀^∞ u^{p−1}/(p−1)! e^{−αu} e^{λu} du` for one eigenvalue.
fn scalar_mode_integral(m: &KernelMode, lambda: Complex64) -> Result<(Complex64, f64)> {
    let z = lambda - m.alpha;
    let r = -z.re;
    let horizon = tail_horizon(m.power - 1, r, 1.0, TAIL_TOL);
    let plan = PanelPlan { horizon, stiffness: z.norm(), tol: CONV_TOL };
    let q = integrate(
        |a, h, cnt| {
            (0..cnt)
                .map(|k| {
                    let u = a + h * k as f64;
                    (z * u).exp() * poly_weight(u, m.power)
                })
                .collect::<Vec<Complex64>>()
        },
        plan,
    )?;
    Ok((q.value, q.est_error + poly_exp_tail(m.power - 1, r, horizon)))
}

/// `∫₀^∞ u^{p−1}/(p−1)! e^{−αu} T(u) du` for a dense generator.
fn dense_mode_integral(a: &ComplexMatrix, kappa: f64, rho: f64, m: &KernelMode) -> Result<(ComplexMatrix, f64)> {
    let r = m.alpha.re + rho;
    let horizon = tail_horizon(m.power - 1, r, kappa, TAIL_TOL);
    let plan = PanelPlan { horizon, stiffness: norm_one(a) + m.alpha.norm(), tol: CONV_TOL };
    let alpha = m.alpha;
    let mut failure: Option<Error> = None;
    let q = integrate(
        |start, h, cnt| {
            let mut out = Vec::with_capacity(cnt);
            let (t0, th) = match (mat_exp(a, start), mat_exp(a, h)) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    return vec![Array2::zeros(a.dim()); cnt];
                }
            };
            let mut cur = t0;
            for k in 0..cnt {
                let u = start + h * k as f64;
                let w = (-alpha * u).exp() * poly_weight(u, m.power);
                out.push(cur.mapv(|z| z * w));
                if k + 1 < cnt {
                    cur = th.dot(&cur);
                }
            }
            out
        },
        plan,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((q.value, q.est_error + kappa * poly_exp_tail(m.power - 1, r, horizon)))
}

pub fn ga_convolution(gen: &Generator, g: &SymbolExpr) -> Result<GAResult> {
    let k = kernel(g)?;
    let n = gen.dim();
    let mut out = identity(n).mapv(|z| z * k.constant);
    let mut est = 0.0;
    for d in &k.delays {
        out = out + t_of(gen, d.tau)?.mapv(|z| z * d.weight);
    }
    for m in &k.modes {
        let (integral, err) = match gen.kind() {
            GeneratorKind::Diagonal(eig) => {
                let mut vals = Vec::with_capacity(n);
                let mut err: f64 = 0.0;
                for &l in eig {
                    let (v, e) = scalar_mode_integral(m, l)?;
                    vals.push(v);
                    err = err.max(e);
                }
                (diag(&vals), err)
            }
            GeneratorKind::Dense(a) => {
                let (kappa, rho) = gen.decay_envelope();
                dense_mode_integral(a, kappa, rho, m)?
            }
        };
        let shift = t_of(gen, m.shift)?;
        let shift_norm = if m.shift == 0.0 { 1.0 } else { op_norm(&shift) };
        out = out + shift.dot(&integral).mapv(|z| z * m.c);
        est += m.c.norm() * shift_norm * err;
    }
    Ok(GAResult { matrix: out, method: Method::Convolution, est_error: est })
}

/// `T(k·dt)` for `k = 0..n`, by stepping with `T(dt)`.
pub fn orbit_matrices(gen: &Generator, grid: GridSpec) -> Result<Vec<ComplexMatrix>> {
    let n = grid.n_samples();
    let mut out = Vec::with_capacity(n);
    match gen.kind() {
        GeneratorKind::Diagonal(eig) => {
            for k in 0..n {
                let t = grid.time(k);
                out.push(diag(&eig.iter().map(|l| (l * t).exp()).collect::<Vec<_>>()));
            }
        }
        GeneratorKind::Dense(a) => {
            let step = mat_exp(a, grid.dt())?;
            let mut cur = identity(gen.dim());
            for _ in 0..n {
                let next = step.dot(&cur);
                out.push(std::mem::replace(&mut cur, next));
            }
        }
    }
    Ok(out)
}

/// Signal `t ↦ M T(t) x` sampled from precomputed orbit matrices.
fn observed_orbit(orbit: &[ComplexMatrix], obs: Option<&ComplexMatrix>, x: &ndarray::Array1<Complex64>, grid: GridSpec) -> Result<SampledSignal> {
    let dim = obs.map_or(x.len(), |m| m.nrows());
    let mut values = Array2::zeros((orbit.len(), dim));
    for (k, t) in orbit.iter().enumerate() {
        let v = t.dot(x);
        let v = match obs {
            Some(m) => m.dot(&v),
            None => v,
        };
        values.row_mut(k).assign(&v);
    }
    SampledSignal::new(grid, values)
}

fn guarded(f: &SampledSignal) -> Result<()> {
    let ratio = f.tail_ratio();
    if ratio > WRAPAROUND_GUARD {
        Err(Error::Wraparound(ratio))
    } else {
        Ok(())
    }
}

/// `𝔒_g x₀ = M_g(T(·)x₀)` on `grid`.
pub fn output_map(gen: &Generator, g: &SymbolExpr, x0: &ndarray::Array1<Complex64>, grid: GridSpec) -> Result<SampledSignal> {
    if x0.len() != gen.dim() {
        return Err(Error::DimensionMismatch("initial state has the wrong dimension".into()));
    }
    let orbit = orbit_matrices(gen, grid)?;
    let f = observed_orbit(&orbit, None, x0, grid)?;
    guarded(&f)?;
    let taps = discrete_taps(&kernel(g)?, grid);
    Ok(correlate(&taps, &f))
}

/// Columns of `M_g(M T(·) e_i)` for every basis vector, plus the three
/// leading samples stacked as matrices `O_k ≈ M g(A) T(k dt)`.
fn toeplitz_columns(gen: &Generator, obs: Option<&ComplexMatrix>, g: &SymbolExpr, grid: GridSpec) -> Result<(Vec<SampledSignal>, [ComplexMatrix; 3])> {
    let n = gen.dim();
    let orbit = orbit_matrices(gen, grid)?;
    let taps = discrete_taps(&kernel(g)?, grid);
    let rows = obs.map_or(n, |m| m.nrows());
    let mut heads = [Array2::zeros((rows, n)), Array2::zeros((rows, n)), Array2::zeros((rows, n))];
    let mut signals = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = ndarray::Array1::zeros(n);
        e[i] = ONE;
        let f = observed_orbit(&orbit, obs, &e, grid)?;
        guarded(&f)?;
        let out = correlate(&taps, &f);
        for (k, h) in heads.iter_mut().enumerate() {
            h.column_mut(i).assign(&out.sample(k));
        }
        signals.push(out);
    }
    Ok((signals, heads))
}

/// `T(t)⁻¹`.
fn t_inverse(gen: &Generator, t: f64) -> Result<ComplexMatrix> {
    match gen.kind() {
        GeneratorKind::Diagonal(eig) => {
            Ok(diag(&eig.iter().map(|l| (-l * t).exp()).collect::<Vec<_>>()))
        }
        GeneratorKind::Dense(_) => inverse(&evaluate_t(gen, t)?),
    }
}

/// `g(A)` (or `C g(A)`) from `O_k T(k dt)⁻¹`, `k = 1, 2`, extrapolated
/// linearly to `k = 0`.
fn read_off(gen: &Generator, heads: &[ComplexMatrix; 3], dt: f64) -> Result<(ComplexMatrix, f64)> {
    let v0 = heads[0].clone();
    let v1 = heads[1].dot(&t_inverse(gen, dt)?);
    let v2 = heads[2].dot(&t_inverse(gen, 2.0 * dt)?);
    let extrap = v1.mapv(|z| z * 2.0) - &v2;
    let est = op_norm(&(&extrap - &v0)) + op_norm(&(&v1 - &v2));
    Ok((extrap, est))
}

pub fn ga_toeplitz(gen: &Generator, g: &SymbolExpr, grid: GridSpec) -> Result<GAResult> {
    let (_, heads) = toeplitz_columns(gen, None, g, grid)?;
    let (matrix, est_error) = read_off(gen, &heads, grid.dt())?;
    Ok(GAResult { matrix, method: Method::Toeplitz, est_error })
}

#[derive(Debug, Clone)]
pub struct Composition {
    /// `M_g(C T(·) e_i)` for each basis vector `e_i`.
    pub signals: Vec<SampledSignal>,
    /// `C g(A)` from the closed-form route.
    pub matrix: ComplexMatrix,
    /// `C g(A)` read off the signals at `t = 0`.
    pub read_off: ComplexMatrix,
    pub read_off_error: f64,
}

pub fn compose_c(gen: &Generator, cop: &ObservationOperator, g: &SymbolExpr, grid: GridSpec) -> Result<Composition> {
    if cop.matrix().ncols() != gen.dim() {
        return Err(Error::DimensionMismatch("C and A have different state dimensions".into()));
    }
    let (signals, heads) = toeplitz_columns(gen, Some(cop.matrix()), g, grid)?;
    let (read_off, read_off_error) = read_off(gen, &heads, grid.dt())?;
    let matrix = cop.matrix().dot(&ga_resolvent(gen, g)?.matrix);
    Ok(Composition { signals, matrix, read_off, read_off_error })
}

/// Unit identity, resolvent atoms and multiplicativity of `g ↦ g(A)` along
/// the convolution route.
pub fn check_calculus_axioms(gen: &Generator, g1: &SymbolExpr, g2: &SymbolExpr) -> Result<CheckReport> {
    let start = Instant::now();
    let n = gen.dim();

    let one = ga_convolution(gen, &SymbolExpr::constant(1.0))?;
    let unit = CheckReport::inequality(
        "unit",
        0.0,
        op_norm(&(&one.matrix - &identity(n))),
        0.0,
        1e-12,
        "g = 1".into(),
        1.0,
    );

    let alpha = 2.0;
    let atom = ga_convolution(gen, &SymbolExpr::pole(alpha))?;
    let exact = resolvent(gen, c(alpha, 0.0))?;
    let atom_report = CheckReport::inequality(
        "resolvent_atom",
        0.0,
        op_norm(&(&atom.matrix - &exact)),
        0.0,
        1e-7,
        format!("g = 1/({alpha}-s)"),
        op_norm(&exact),
    );

    let a = ga_convolution(gen, g1)?;
    let b = ga_convolution(gen, g2)?;
    let ab = ga_convolution(gen, &SymbolExpr::Product(vec![g1.clone(), g2.clone()]))?;
    let prod = a.matrix.dot(&b.matrix);
    let (na, nb) = (op_norm(&a.matrix), op_norm(&b.matrix));
    let combined = ab.est_error + na * b.est_error + a.est_error * nb + a.est_error * b.est_error;
    let roundoff = 1e-12 * (1.0 + na * nb);
    let mult = CheckReport::inequality(
        "multiplicative",
        0.0,
        op_norm(&(&ab.matrix - &prod)),
        0.0,
        combined + roundoff,
        format!("g1 = {g1}, g2 = {g2}"),
        op_norm(&prod).max(op_norm(&ab.matrix)),
    );

    let mut report = CheckReport::aggregate("calculus_axioms", vec![unit, atom_report, mult]);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
