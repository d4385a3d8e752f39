//! Named numerical checks, each producing a [`CheckReport`].

use serde::Serialize;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;

use crate::admissibility::{
    commuting_check, observability_gramian, output_energy, probe_vectors, sqrt_minus_a, sqrt_t_sup,
    weighted_sup, ObservationOperator,
};
use crate::calculus::{ga_convolution, ga_resolvent};
use crate::error::{Error, Result};
use crate::numkernel::{
    adjoint, c, hermitian_eigs, hermitian_sqrt, identity, inverse, lyapunov_residual, norm_fro,
    op_norm, solve_lyapunov, vec_norm, ComplexMatrix,
};
use crate::semigroup::{evaluate_t, has_real_negative_spectrum, resolvent, semigroup_bounds, Generator};
use crate::hardy::{l2_norm, shift, toeplitz_apply, GridSpec, SampledSignal};
use crate::symbols::{hinf_norm, multiply, SymbolExpr};

/// Outcome of one check. For inequalities `measured ≤ claimed` passes when
/// `measured ≤ claimed·(1 + tolerance) + abs_tolerance`; identities use
/// `claimed = 0` and put the allowance in `abs_tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub bound_claimed: f64,
    pub bound_measured: f64,
    pub witness: String,
    pub tolerance: f64,
    pub abs_tolerance: f64,
    pub witness_norm: f64,
    pub pass: bool,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<CheckReport>,
}

impl CheckReport {
    pub fn inequality(
        name: &str,
        claimed: f64,
        measured: f64,
        tolerance: f64,
        abs_tolerance: f64,
        witness: String,
        witness_norm: f64,
    ) -> Self {
        let allowed = claimed * (1.0 + tolerance) + abs_tolerance;
        let pass = measured.is_finite()
            && allowed.is_finite()
            && measured <= allowed
            && witness_norm > 0.0;
        Self {
            name: name.to_string(),
            bound_claimed: claimed,
            bound_measured: measured,
            witness,
            tolerance,
            abs_tolerance,
            witness_norm,
            pass,
            runtime_ms: 0.0,
            components: Vec::new(),
        }
    }

    /// `measured / allowed`; at most 1 for a passing check.
    pub fn ratio(&self) -> f64 {
        let allowed = self.bound_claimed * (1.0 + self.tolerance) + self.abs_tolerance;
        if allowed > 0.0 {
            self.bound_measured / allowed
        } else if self.bound_measured <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Passes iff every component passes; the headline numbers are the
    /// worst normalized ratio (claimed 1).
    pub fn aggregate(name: &str, components: Vec<CheckReport>) -> Self {
        let worst = components
            .iter()
            .enumerate()
            .max_by(|a, b| {
                let (ra, rb) = (a.1.ratio(), b.1.ratio());
                ra.partial_cmp(&rb).unwrap_or(std::cmp::Ordering::Greater).then(b.0.cmp(&a.0))
            })
            .map(|(_, r)| r);
        let (measured, witness) = match worst {
            Some(r) => (r.ratio(), format!("{}: {}", r.name, r.witness)),
            None => (f64::NAN, "no components".to_string()),
        };
        let witness_norm = components.iter().map(|r| r.witness_norm).fold(0.0, f64::max);
        let pass = !components.is_empty() && components.iter().all(|r| r.pass);
        Self {
            name: name.to_string(),
            bound_claimed: 1.0,
            bound_measured: measured,
            witness,
            tolerance: 0.0,
            abs_tolerance: 0.0,
            witness_norm,
            pass,
            runtime_ms: components.iter().map(|r| r.runtime_ms).sum(),
            components,
        }
    }
}

fn finish(mut r: CheckReport, start: Instant) -> CheckReport {
    r.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    r
}

/// `λ_max` of the Gramian of `(M, A)`.
fn gramian_max(gen: &Generator, m: &ComplexMatrix) -> Result<f64> {
    let q = solve_lyapunov(&gen.matrix(), &adjoint(m).dot(m))?;
    Ok(hermitian_eigs(&q)?.max())
}

fn is_dissipative(gen: &Generator) -> Result<bool> {
    let a = gen.matrix();
    let sym = crate::numkernel::hermitian_part(&a);
    Ok(hermitian_eigs(&sym)?.max() <= 1e-12 * norm_fro(&a))
}

/// Output-map bounds for `g(A)`:
/// * `λ_max(Q_g) ≤ γ_A‖g‖∞²`, `Q_g` the Gramian of `(g(A), A)` and
///   `γ_A = λ_max(Q_I)`;
/// * `√t‖g(A)T(t)‖ ≤ √γ_A·M·‖g‖∞` on `[1e-4, 1]`, `M = sup_{[0,1]}‖T‖`;
/// * for dissipative `A` additionally `√t‖g(A)T(t)‖ ≤ M‖g‖∞`.
pub fn check_t0(gen: &Generator, g: &SymbolExpr) -> Result<CheckReport> {
    let start = Instant::now();
    let ga = ga_resolvent(gen, g)?.matrix;
    let hinf = hinf_norm(g);
    let gamma_a = gramian_max(gen, &identity(gen.dim()))?;
    let qg = gramian_max(gen, &ga)?;
    let gram = CheckReport::inequality(
        "output_gramian",
        gamma_a * hinf * hinf,
        qg,
        1e-6,
        1e-12 * gamma_a * hinf * hinf,
        format!("g = {g}, gamma_A = {gamma_a:.6e}"),
        hinf,
    );
    let m = semigroup_bounds(gen, 1e-12)?.m;
    let (sup, t_star) = sqrt_t_sup(gen, &ga, 1e-4, 1.0)?;
    let mut parts = vec![
        gram,
        CheckReport::inequality(
            "sqrt_t_output",
            gamma_a.sqrt() * m * hinf,
            sup,
            1e-4,
            0.0,
            format!("t = {t_star:e}"),
            hinf,
        ),
    ];
    if is_dissipative(gen)? {
        parts.push(CheckReport::inequality(
            "sqrt_t_semigroup_sup",
            m * hinf,
            sup,
            1e-4,
            0.0,
            format!("t = {t_star:e}"),
            hinf,
        ));
    }
    Ok(finish(CheckReport::aggregate("t0_bounds", parts), start))
}

/// `Re s ∈ {0.1, 1, 10}` × `Im s ∈ {0, ±1, ±10}`.
pub fn default_s_samples() -> Vec<Complex64> {
    let mut out = Vec::new();
    for re in [0.1, 1.0, 10.0] {
        for im in [0.0, 1.0, -1.0, 10.0, -10.0] {
            out.push(c(re, im));
        }
    }
    out
}

/// `√Re s·‖g(A)(sI − A)⁻¹‖` against `‖g‖∞` and against the Cauchy–Schwarz
/// constant `‖g‖∞·√(γ_A/2)`.
pub fn check_eq21(gen: &Generator, g: &SymbolExpr, s_samples: &[Complex64]) -> Result<CheckReport> {
    let start = Instant::now();
    if s_samples.is_empty() || s_samples.iter().any(|s| !(s.re > 0.0)) {
        return Err(Error::Config("resolvent samples need Re s > 0".into()));
    }
    let ga = ga_resolvent(gen, g)?.matrix;
    let hinf = hinf_norm(g);
    let gamma_a = gramian_max(gen, &identity(gen.dim()))?;
    let mut worst = (f64::NEG_INFINITY, c(0.0, 0.0));
    for &s in s_samples {
        let v = s.re.sqrt() * op_norm(&ga.dot(&resolvent(gen, s)?));
        if v > worst.0 {
            worst = (v, s);
        }
    }
    let witness = format!("s = {}", worst.1);
    let parts = vec![
        CheckReport::inequality("resolvent_hinf", hinf, worst.0, 1e-6, 0.0, witness.clone(), hinf),
        CheckReport::inequality(
            "resolvent_gramian",
            hinf * (gamma_a / 2.0).sqrt(),
            worst.0,
            1e-6,
            0.0,
            witness,
            hinf,
        ),
    ];
    Ok(finish(CheckReport::aggregate("eq21", parts), start))
}

/// `‖g(A)‖ ≤ √(m₂/m₁)·‖g‖∞` for a commuting, exactly observable `C`.
pub fn check_thm33(gen: &Generator, cop: &ObservationOperator, g: &SymbolExpr) -> Result<CheckReport> {
    let start = Instant::now();
    let commuting = commuting_check(gen, cop)?;
    let gram = observability_gramian(gen, cop)?;
    if !(gram.m_exact > 1e-14 * gram.m_admissible) {
        return Err(Error::NotExactlyObservable(gram.m_exact));
    }
    let ga = ga_convolution(gen, g)?;
    let hinf = hinf_norm(g);
    let bound = CheckReport::inequality(
        "calculus_bound",
        (gram.m_admissible / gram.m_exact).sqrt() * hinf,
        op_norm(&ga.matrix),
        1e-6,
        ga.est_error,
        format!("g = {g}, m2/m1 = {:.6e}", gram.m_admissible / gram.m_exact),
        hinf,
    );
    Ok(finish(CheckReport::aggregate("thm33", vec![commuting, bound]), start))
}

/// Von Neumann inequality with its Gramian witness: `Q = −(A⁻¹ + A⁻ᴴ)`,
/// `C = √Q·A` has Gramian `I` and `CᴴC = −(A + Aᴴ)`.
pub fn check_cor33a(gen: &Generator, g: &SymbolExpr) -> Result<CheckReport> {
    let start = Instant::now();
    let a = gen.matrix();
    let n = gen.dim();
    let ainv = inverse(&a)?;
    let q = (&ainv + &adjoint(&ainv)).mapv(|z| -z);
    let root = hermitian_sqrt(&crate::numkernel::hermitian_part(&q))
        .map_err(|_| Error::NotStable("−(A⁻¹ + A⁻ᴴ) is not positive semidefinite".into()))?;
    let cm = root.dot(&a);
    let an = op_norm(&a);

    let lyap = (adjoint(&cm).dot(&cm) + &a + adjoint(&a)).mapv(|z| z);
    let lyap_report = CheckReport::inequality(
        "dissipation_identity",
        0.0,
        op_norm(&lyap),
        0.0,
        1e-9 * an.max(1.0),
        "C^H C + A + A^H".into(),
        op_norm(&cm),
    );
    let gram = solve_lyapunov(&a, &adjoint(&cm).dot(&cm))?;
    let gram_report = CheckReport::inequality(
        "unit_gramian",
        0.0,
        op_norm(&(&gram - &identity(n))),
        0.0,
        1e-8,
        format!("residual {:.3e}", lyapunov_residual(&a, &gram, &adjoint(&cm).dot(&cm))),
        1.0,
    );
    let ga = ga_convolution(gen, g)?;
    let hinf = hinf_norm(g);
    let vn = CheckReport::inequality(
        "von_neumann",
        hinf,
        op_norm(&ga.matrix),
        1e-6,
        1e-8,
        format!("g = {g}"),
        hinf,
    );
    Ok(finish(CheckReport::aggregate("cor33a", vec![lyap_report, gram_report, vn]), start))
}

fn require_real_spectrum(gen: &Generator) -> Result<()> {
    if has_real_negative_spectrum(gen) {
        Ok(())
    } else {
        Err(Error::NonRealSpectrum("check needs a self-adjoint generator".into()))
    }
}

/// Admissibility constants `m` with `√(∫‖M T(τ/2)x‖²dτ) ≤ m‖x‖`, i.e.
/// `m = √(2 λ_max(Q))`, for `(−A*)^{1/2}` on `T*` and `(−A)^{1/2}` on `T`.
pub fn half_time_constants(gen: &Generator) -> Result<(f64, f64)> {
    let adj = gen.adjoint()?;
    let m1 = (2.0 * gramian_max(&adj, sqrt_minus_a(&adj)?.matrix())?).sqrt();
    let m2 = (2.0 * gramian_max(gen, sqrt_minus_a(gen)?.matrix())?).sqrt();
    Ok((m1, m2))
}

/// `‖g(A)‖ ≤ m₁m₂‖g‖∞ + ‖g(A)T(t)‖`.
pub fn check_thm34(gen: &Generator, g: &SymbolExpr, t_probe: f64) -> Result<CheckReport> {
    let start = Instant::now();
    require_real_spectrum(gen)?;
    let (m1, m2) = half_time_constants(gen)?;
    let ga = ga_convolution(gen, g)?;
    let hinf = hinf_norm(g);
    let gat = op_norm(&ga.matrix.dot(&evaluate_t(gen, t_probe)?));
    let r = CheckReport::inequality(
        "thm34",
        m1 * m2 * hinf + gat,
        op_norm(&ga.matrix),
        1e-6,
        ga.est_error,
        format!("g = {g}, t = {t_probe}, m1 = {m1:.6}, m2 = {m2:.6}"),
        hinf,
    );
    Ok(finish(r, start))
}

/// `sup_t t‖AT(t)‖` against `m₁m₂` (plain admissibility
/// constants `√λ_max(Q)`) and against the closed form `e⁻¹`.
pub fn check_analytic_lemma(gen: &Generator) -> Result<CheckReport> {
    let start = Instant::now();
    require_real_spectrum(gen)?;
    let adj = gen.adjoint()?;
    let m1 = gramian_max(&adj, sqrt_minus_a(&adj)?.matrix())?.sqrt();
    let m2 = gramian_max(gen, sqrt_minus_a(gen)?.matrix())?.sqrt();
    let a = gen.matrix();
    let (lo, hi) = (1e-2 / gen.norm_bound(), 1e2 / gen.decay_envelope().1);
    let (sup, t_star) = weighted_sup(gen, &a, 1.0, lo, hi)?;
    let witness = format!("t = {t_star:e}");
    let parts = vec![
        CheckReport::inequality("analytic_m1m2", m1 * m2, sup, 1e-9, 0.0, witness.clone(), op_norm(&a)),
        CheckReport::inequality("analytic_exact", (-1f64).exp(), sup, 0.0, 1e-9, witness, op_norm(&a)),
    ];
    Ok(finish(CheckReport::aggregate("analytic_lemma", parts), start))
}

/// Exact observability of `(−A)^{1/2}` in the form
/// `‖x‖² ≤ m₁²·∫‖(−A)^{1/2}T(τ/2)x‖²dτ = m₁²·2xᴴQx`: uniformly through
/// `1/(2λ_min Q) ≤ m₁²`, and pointwise by quadrature on probe vectors and on
/// the eigenvector of `λ_min(Q)`.
pub fn check_eq26(gen: &Generator) -> Result<CheckReport> {
    let start = Instant::now();
    require_real_spectrum(gen)?;
    let (m1, _) = half_time_constants(gen)?;
    let cop = sqrt_minus_a(gen)?;
    let q = solve_lyapunov(&gen.matrix(), &adjoint(cop.matrix()).dot(cop.matrix()))?;
    let spec = hermitian_eigs(&q)?;
    if !(spec.min() > 0.0) {
        return Err(Error::NotExactlyObservable(spec.min()));
    }
    let mut parts = vec![CheckReport::inequality(
        "uniform",
        m1 * m1,
        1.0 / (2.0 * spec.min()),
        1e-9,
        0.0,
        format!("lambda_min(Q) = {:.6e}", spec.min()),
        spec.min(),
    )];
    let mut probes = probe_vectors(gen.dim(), 4, crate::admissibility::PROBE_SEED);
    probes.push(spec.eigenvectors.column(0).to_owned());
    let mut worst = (f64::NEG_INFINITY, 0usize, 0.0);
    for (k, x) in probes.iter().enumerate() {
        // ∫‖C T(τ/2)x‖²dτ = 2∫‖C T(s)x‖²ds
        let energy = 2.0 * output_energy(gen, cop.matrix(), x, 1e-10)?;
        let ratio = vec_norm(x).powi(2) / (m1 * m1 * energy);
        if ratio > worst.0 {
            worst = (ratio, k, energy);
        }
    }
    parts.push(CheckReport::inequality(
        "pointwise",
        1.0,
        worst.0,
        1e-6,
        0.0,
        format!("probe {} (energy {:.6e})", worst.1, worst.2),
        worst.2,
    ));
    Ok(finish(CheckReport::aggregate("eq26", parts), start))
}

/// Log-substitution trapezoid for `∫₀^∞‖(−tA)^{1/2}T(t)x‖² dt/t`
/// (`t = e^u`), independent of the panel quadrature.
fn square_function_lhs(gen: &Generator, x: &crate::numkernel::ComplexVector) -> Result<f64> {
    let eig = gen.eigenvalues();
    let scale = gen.norm_bound();
    let rate = match eig {
        Some(e) => e.iter().map(|l| -l.re).fold(f64::INFINITY, f64::min),
        None => gen.decay_envelope().1,
    };
    let (u_lo, u_hi) = ((1e-16 / scale).ln(), (40.0 / rate).ln());
    let steps = 8192;
    let h = (u_hi - u_lo) / steps as f64;
    let root = sqrt_minus_a(gen)?;
    let mut acc = 0.0;
    for k in 0..=steps {
        let t = (u_lo + h * k as f64).exp();
        let y = match eig {
            Some(e) => {
                let v: crate::numkernel::ComplexVector =
                    ndarray::Array1::from_shape_fn(x.len(), |i| (e[i] * t).exp() * x[i]);
                root.matrix().dot(&v).mapv(|z| z * t.sqrt())
            }
            None => root.matrix().dot(&evaluate_t(gen, t)?.dot(x)).mapv(|z| z * t.sqrt()),
        };
        // dt/t = du
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        acc += w * vec_norm(&y).powi(2);
    }
    Ok(acc * h)
}

/// `∫‖(−tA)^{1/2}T(t)x‖² dt/t = ∫‖(−A)^{1/2}T(t)x‖² dt` by two independent
/// quadratures, relative agreement 1e-6.
pub fn check_square_function(gen: &Generator) -> Result<CheckReport> {
    let start = Instant::now();
    require_real_spectrum(gen)?;
    let root = sqrt_minus_a(gen)?;
    let mut parts = Vec::new();
    for (k, x) in probe_vectors(gen.dim(), 3, crate::admissibility::PROBE_SEED ^ 0x5f).iter().enumerate() {
        let lhs = square_function_lhs(gen, x)?;
        let rhs = output_energy(gen, root.matrix(), x, 1e-10)?;
        parts.push(CheckReport::inequality(
            &format!("probe_{k}"),
            0.0,
            (lhs - rhs).abs(),
            0.0,
            1e-6 * rhs,
            format!("lhs = {lhs:.12e}, rhs = {rhs:.12e}"),
            rhs,
        ));
    }
    Ok(finish(CheckReport::aggregate("square_function", parts), start))
}

/// Decaying test signals for the Toeplitz checks; all pass the wraparound
/// guard on windows of length 16 or more.
pub fn decaying_signals() -> Vec<(&'static str, fn(f64) -> Complex64)> {
    vec![
        ("exp3", |t| c((-3.0 * t).exp(), 0.0)),
        ("damped_cos", |t| c((-2.0 * t).exp() * (5.0 * t).cos(), 0.0)),
        ("t_exp3", |t| c(t * (-3.0 * t).exp(), 0.0)),
        ("bump", |t| c((-4.0 * (t - 1.0) * (t - 1.0)).exp(), 0.0)),
        ("chirp", |t| {
            let e = (-2.5 * t).exp();
            c(e * (2.0 * t).sin(), e * (1.0 - t))
        }),
    ]
}

/// The calculus battery plus a delayed resolvent.
pub fn toeplitz_battery() -> Vec<(String, SymbolExpr)> {
    let mut out = crate::symbols::battery();
    let extra = "exp(0.5*s)*(1/(2-s))";
    out.push((extra.to_string(), extra.parse().expect("battery symbol parses")));
    out
}

/// One residual of a Toeplitz identity, relative to `‖f‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToeplitzCase {
    pub label: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToeplitzResiduals {
    /// `‖M_{g₁g₂}f − M_{g₁}M_{g₂}f‖ / ‖f‖`.
    pub multiplicative: Vec<ToeplitzCase>,
    /// `‖σ_τ M_g f − M_g σ_τ f‖ / ‖f‖`.
    pub shift: Vec<ToeplitzCase>,
    /// `‖M_g f‖ / (‖g‖∞‖f‖) − 1`, positive when the norm bound is violated.
    pub norm_excess: Vec<ToeplitzCase>,
}

/// Shift used by the commutation check; a grid multiple for every `dt = 2⁻ᵏ`, `k ≤ 8` and its refinements.
pub const TOEPLITZ_SHIFT: f64 = 0.25;

pub fn toeplitz_residuals(
    symbols: &[(String, SymbolExpr)],
    signals: &[(&str, fn(f64) -> Complex64)],
    grid: GridSpec,
) -> Result<ToeplitzResiduals> {
    let mut out = ToeplitzResiduals { multiplicative: Vec::new(), shift: Vec::new(), norm_excess: Vec::new() };
    for (sname, f) in signals {
        let f = SampledSignal::from_scalar_fn(grid, f)?;
        let fn2 = l2_norm(&f);
        let mut applied = Vec::with_capacity(symbols.len());
        for (gname, g) in symbols {
            let mg = toeplitz_apply(g, &f)?;
            let lhs = shift(&mg, TOEPLITZ_SHIFT)?;
            let rhs = toeplitz_apply(g, &shift(&f, TOEPLITZ_SHIFT)?)?;
            out.shift.push(ToeplitzCase {
                label: format!("{gname} | {sname}"),
                residual: l2_norm(&lhs.sub(&rhs)?) / fn2,
            });
            out.norm_excess.push(ToeplitzCase {
                label: format!("{gname} | {sname}"),
                residual: l2_norm(&mg) / (hinf_norm(g) * fn2) - 1.0,
            });
            applied.push(mg);
        }
        for (g1name, g1) in symbols {
            for ((g2name, g2), m2f) in symbols.iter().zip(&applied) {
                let seq = toeplitz_apply(g1, m2f)?;
                let prod = toeplitz_apply(&multiply(g1, g2), &f)?;
                out.multiplicative.push(ToeplitzCase {
                    label: format!("{g1name} * {g2name} | {sname}"),
                    residual: l2_norm(&prod.sub(&seq)?) / fn2,
                });
            }
        }
    }
    Ok(out)
}

fn worst(cases: &[ToeplitzCase]) -> (f64, String) {
    cases
        .iter()
        .fold((f64::NEG_INFINITY, String::new()), |acc, c| if c.residual > acc.0 { (c.residual, c.label.clone()) } else { acc })
}

/// Residuals below this are roundoff and are not expected to shrink.
pub const REFINEMENT_FLOOR: f64 = 1e-12;

/// Toeplitz identities on `grid` with allowance `tol`, plus the refinement
/// rule: every residual above [`REFINEMENT_FLOOR`] shrinks at least 4× when
/// `dt` is halved.
pub fn check_toeplitz_algebra(
    symbols: &[(String, SymbolExpr)],
    signals: &[(&str, fn(f64) -> Complex64)],
    grid: GridSpec,
    tol: f64,
) -> Result<CheckReport> {
    let start = Instant::now();
    let coarse = toeplitz_residuals(symbols, signals, grid)?;
    let fine = toeplitz_residuals(symbols, signals, grid.refined())?;
    let mut parts = Vec::new();
    for (name, cases) in [("multiplicative", &coarse.multiplicative), ("shift", &coarse.shift)] {
        let (w, label) = worst(cases);
        parts.push(CheckReport::inequality(name, 0.0, w, 0.0, tol, label, 1.0));
    }
    let (w, label) = worst(&coarse.norm_excess);
    parts.push(CheckReport::inequality("norm_bound", 0.0, w, 0.0, tol, label, 1.0));

    // Largest fine/coarse ratio among residuals above roundoff.
    let mut ratio = (0.0f64, String::from("all residuals at roundoff"));
    for (a, b) in coarse.multiplicative.iter().chain(&coarse.shift).zip(fine.multiplicative.iter().chain(&fine.shift)) {
        if a.residual > REFINEMENT_FLOOR {
            let r = b.residual / a.residual;
            if r > ratio.0 {
                ratio = (r, a.label.clone());
            }
        }
    }
    parts.push(CheckReport::inequality("refinement", 0.25, ratio.0, 0.0, 0.0, ratio.1, 1.0));
    Ok(finish(CheckReport::aggregate("toeplitz_properties", parts), start))
}

/// Reports as a JSON array.
pub fn write_json<W: Write>(reports: &[CheckReport], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, reports)
        .map_err(|e| Error::Config(format!("json write failed: {e}")))
}

/// `name, claimed, measured, pass` with components flattened as
/// `parent/child`.
pub fn write_csv<W: Write>(reports: &[CheckReport], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "claimed", "measured", "pass"]).map_err(io)?;
    fn rows(r: &CheckReport, prefix: &str, acc: &mut Vec<[String; 4]>) {
        let name = if prefix.is_empty() { r.name.clone() } else { format!("{prefix}/{}", r.name) };
        acc.push([name.clone(), r.bound_claimed.to_string(), r.bound_measured.to_string(), r.pass.to_string()]);
        for c in &r.components {
            rows(c, &name, acc);
        }
    }
    let mut acc = Vec::new();
    for r in reports {
        rows(r, "", &mut acc);
    }
    for rec in acc {
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    Ok(())
}
