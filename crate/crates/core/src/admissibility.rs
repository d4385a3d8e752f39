//! Admissible observation operators and their Gramian constants.

use std::time::Instant;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numkernel::{
    adjoint, c, diag, exp_integral, hermitian_eigs, inverse, is_diagonal, lyapunov_residual,
    mat_exp, norm_one, op_norm, phi1, solve_lyapunov, vec_norm, ComplexMatrix, ComplexVector,
};
use crate::quadrature::{integrate, PanelPlan};
use crate::semigroup::{evaluate_t, matrix_to_rows, resolvent, semigroup_bounds, Generator, GeneratorKind};
use crate::verifier::CheckReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationOperator {
    matrix: ComplexMatrix,
}

impl ObservationOperator {
    pub fn new(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: crate::numkernel::identity(n) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn check_against(&self, gen: &Generator) -> Result<()> {
        if self.state_dim() != gen.dim() {
            return Err(Error::DimensionMismatch(format!(
                "C acts on dimension {}, A on {}",
                self.state_dim(),
                gen.dim()
            )));
        }
        if !crate::numkernel::is_finite(&self.matrix) {
            return Err(Error::DimensionMismatch("C has non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianReport {
    pub q: ComplexMatrix,
    /// `λ_max(Q)`: the sharp `m` in `∫‖CT(t)x‖² ≤ m‖x‖²`.
    pub m_admissible: f64,
    /// `λ_min(Q)`: the sharp exact-observability constant.
    pub m_exact: f64,
    pub residual: f64,
    /// Largest relative gap between `xᴴQx` and direct quadrature of
    /// `∫‖CT(t)x‖²dt` over the seeded probe vectors.
    pub quadrature_mismatch: f64,
}

impl Serialize for GramianReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            q: Vec<Vec<[f64; 2]>>,
            m_admissible: f64,
            m_exact: f64,
            residual: f64,
            quadrature_mismatch: f64,
        }
        Doc {
            q: matrix_to_rows(&self.q),
            m_admissible: self.m_admissible,
            m_exact: self.m_exact,
            residual: self.residual,
            quadrature_mismatch: self.quadrature_mismatch,
        }
        .serialize(s)
    }
}

/// Probe vectors for the quadrature cross-check: ChaCha8 stream seeded with
/// this constant, standard complex normal entries.
pub const PROBE_SEED: u64 = 0x0b5e_7a7e;
pub const PROBE_COUNT: usize = 5;

pub fn probe_vectors(n: usize, count: usize, seed: u64) -> Vec<ComplexVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            Array1::from_shape_fn(n, |_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re * s, im * s)
            })
        })
        .collect()
}

/// `∫₀^∞ ‖M T(t) x‖² dt` by panel Simpson, with the neglected tail bounded
/// through the decay envelope.
pub fn output_energy(gen: &Generator, m: &ComplexMatrix, x: &ComplexVector, rel_tol: f64) -> Result<f64> {
    let (kappa, rho) = gen.decay_envelope();
    let scale = op_norm(m).powi(2) * kappa * kappa * vec_norm(x).powi(2);
    if scale == 0.0 {
        return Ok(0.0);
    }
    // tail: scale·e^{−2ρt}/(2ρ) ≤ rel_tol·scale·1e-3/(2ρ)
    let horizon = (1e3 / rel_tol).ln() / (2.0 * rho);
    let stiffness = 2.0 * gen.norm_bound();
    let tol = rel_tol * 1e-3 * scale / (2.0 * rho).max(1.0);
    let mut failure = None;
    let q = integrate(
        |start, h, cnt| match gen.kind() {
            GeneratorKind::Diagonal(eig) => (0..cnt)
                .map(|k| {
                    let t = start + h * k as f64;
                    let v: ComplexVector =
                        Array1::from_shape_fn(x.len(), |i| (eig[i] * t).exp() * x[i]);
                    vec_norm(&m.dot(&v)).powi(2)
                })
                .collect::<Vec<f64>>(),
            GeneratorKind::Dense(a) => {
                let (t0, th) = match (mat_exp(a, start), mat_exp(a, h)) {
                    (Ok(p), Ok(q)) => (p, q),
                    (Err(e), _) | (_, Err(e)) => {
                        failure = Some(e);
                        return vec![0.0; cnt];
                    }
                };
                let mut v = t0.dot(x);
                let mut out = Vec::with_capacity(cnt);
                for k in 0..cnt {
                    out.push(vec_norm(&m.dot(&v)).powi(2));
                    if k + 1 < cnt {
                        v = th.dot(&v);
                    }
                }
                out
            }
        },
        PanelPlan { horizon, stiffness, tol },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.value)
}

fn quadratic_form(q: &ComplexMatrix, x: &ComplexVector) -> f64 {
    x.iter().zip(q.dot(x).iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// `Q` with `AᴴQ + QA = −CᴴC` and its extreme eigenvalues.
pub fn observability_gramian(gen: &Generator, cop: &ObservationOperator) -> Result<GramianReport> {
    cop.check_against(gen)?;
    let a = gen.matrix();
    let r = adjoint(cop.matrix()).dot(cop.matrix());
    let q = solve_lyapunov(&a, &r)?;
    let spec = hermitian_eigs(&q)?;
    let residual = lyapunov_residual(&a, &q, &r);
    let mut mismatch: f64 = 0.0;
    for x in probe_vectors(gen.dim(), PROBE_COUNT, PROBE_SEED) {
        let exact = quadratic_form(&q, &x);
        let quad = output_energy(gen, cop.matrix(), &x, 1e-8)?;
        let gap = (quad - exact).abs();
        let rel = if gap == 0.0 { 0.0 } else { gap / exact.abs().max(f64::MIN_POSITIVE) };
        mismatch = mismatch.max(rel);
    }
    Ok(GramianReport {
        m_admissible: spec.max(),
        m_exact: spec.min(),
        residual,
        quadrature_mismatch: mismatch,
        q,
    })
}

/// Times used by the commutation and bound scans: `{0} ∪ logspace(−4, 1)`.
fn scan_times() -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend((0..=50).map(|k| 10f64.powf(-4.0 + 5.0 * k as f64 / 50.0)));
    t
}

/// Relative commutator defects `‖CT(t) − T(t)C‖/(‖C‖‖T(t)‖)` and
/// `‖CA⁻¹ − A⁻¹C‖/(‖C‖‖A⁻¹‖)`; passes below 1e-9.
pub fn commuting_check(gen: &Generator, cop: &ObservationOperator) -> Result<CheckReport> {
    let start = Instant::now();
    cop.check_against(gen)?;
    let cm = cop.matrix();
    if cm.nrows() != cm.ncols() {
        return Err(Error::DimensionMismatch("commutation needs a square C".into()));
    }
    let cn = op_norm(cm);
    let mut worst = (0.0, "C = 0".to_string());
    if cn > 0.0 {
        for t in scan_times() {
            let tt = evaluate_t(gen, t)?;
            let d = op_norm(&(cm.dot(&tt) - tt.dot(cm))) / (cn * op_norm(&tt));
            if d > worst.0 || worst.1 == "C = 0" {
                worst = (d, format!("t = {t:e}"));
            }
        }
        let ainv = inverse(&gen.matrix())?;
        let d = op_norm(&(cm.dot(&ainv) - ainv.dot(cm))) / (cn * op_norm(&ainv));
        if d > worst.0 {
            worst = (d, "A⁻¹".to_string());
        }
    }
    let mut r = CheckReport::inequality("commuting", 0.0, worst.0, 0.0, 1e-9, worst.1, cn);
    r.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

/// `‖M T(t)‖`, with diagonal fast paths.
pub fn norm_mt(gen: &Generator, m: &ComplexMatrix, t: f64) -> Result<f64> {
    match gen.kind() {
        GeneratorKind::Diagonal(eig) => {
            let d: Vec<Complex64> = eig.iter().map(|l| (l * t).exp()).collect();
            if is_diagonal(m) {
                Ok((0..eig.len()).map(|i| (m[[i, i]] * d[i]).norm()).fold(0.0, f64::max))
            } else {
                Ok(op_norm(&m.dot(&diag(&d))))
            }
        }
        GeneratorKind::Dense(_) => Ok(op_norm(&m.dot(&evaluate_t(gen, t)?))),
    }
}

/// `max √t‖M T(t)‖` over `[t_min, t_max]`; returns `(value, argmax)`.
pub fn sqrt_t_sup(gen: &Generator, m: &ComplexMatrix, t_min: f64, t_max: f64) -> Result<(f64, f64)> {
    weighted_sup(gen, m, 0.5, t_min, t_max)
}

/// `max t^p‖M T(t)‖` over a log grid of `[t_min, t_max]` (512 points) plus
/// golden-section refinement around the best grid point.
pub fn weighted_sup(gen: &Generator, m: &ComplexMatrix, p: f64, t_min: f64, t_max: f64) -> Result<(f64, f64)> {
    let pts = 512;
    let (lo, hi) = (t_min.ln(), t_max.ln());
    let mut best = (f64::NEG_INFINITY, t_min, 0usize);
    let f = |u: f64| -> Result<f64> { Ok((p * u).exp() * norm_mt(gen, m, u.exp())?) };
    for k in 0..pts {
        let u = lo + (hi - lo) * k as f64 / (pts - 1) as f64;
        let v = f(u)?;
        if v > best.0 {
            best = (v, u.exp(), k);
        }
    }
    let step = (hi - lo) / (pts - 1) as f64;
    let mut a = (lo + step * best.2 as f64 - step).max(lo);
    let mut b = (lo + step * best.2 as f64 + step).min(hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..60 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        }
    }
    for (v, u) in [(f1, x1), (f2, x2)] {
        if v > best.0 {
            best = (v, u.exp(), best.2);
        }
    }
    Ok((best.0, best.1))
}

/// `γ = max √t‖CT(t)‖` against `√m_admissible · M`, the constant from the
/// standard proof of the `t^{−1/2}` bound.
pub fn sqrt_t_bound_scan(gen: &Generator, cop: &ObservationOperator, t_min: f64, t_max: f64) -> Result<(f64, CheckReport)> {
    let start = Instant::now();
    let commuting = commuting_check(gen, cop)?;
    let gram = observability_gramian(gen, cop)?;
    let m_sg = semigroup_bounds(gen, 1e-12)?.m;
    let (gamma, t_star) = sqrt_t_sup(gen, cop.matrix(), t_min, t_max)?;
    let bound = CheckReport::inequality(
        "sqrt_t_bound",
        gram.m_admissible.sqrt() * m_sg,
        gamma,
        1e-6,
        0.0,
        format!("t = {t_star:e}"),
        op_norm(cop.matrix()),
    );
    let mut r = CheckReport::aggregate("sqrt_t_scan", vec![commuting, bound]);
    r.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((gamma, r))
}

/// `(−A)^{1/2}` for a diagonal generator with real negative spectrum or a
/// Hermitian negative definite dense one.
pub fn sqrt_minus_a(gen: &Generator) -> Result<ObservationOperator> {
    match gen.kind() {
        GeneratorKind::Diagonal(eig) => {
            if let Some(bad) = eig.iter().find(|l| l.im != 0.0) {
                return Err(Error::NonRealSpectrum(format!("eigenvalue {bad}")));
            }
            Ok(ObservationOperator::new(diag(
                &eig.iter().map(|l| c((-l.re).sqrt(), 0.0)).collect::<Vec<_>>(),
            )))
        }
        GeneratorKind::Dense(a) => {
            let scale = crate::numkernel::norm_fro(a).max(1.0);
            let defect = crate::numkernel::hermitian_defect(a);
            if defect > 1e-12 * scale {
                return Err(Error::NonRealSpectrum(format!("A is not Hermitian (defect {defect:.3e})")));
            }
            let neg = a.mapv(|z| -z);
            let spec = hermitian_eigs(&neg)?;
            if spec.min() <= 0.0 {
                return Err(Error::NonRealSpectrum("−A is not positive definite".into()));
            }
            Ok(ObservationOperator::new(spec.apply_fn(f64::sqrt)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTrace {
    /// Last iterate.
    #[serde(serialize_with = "ser_vec")]
    pub value: ComplexVector,
    pub parameters: Vec<f64>,
    /// `‖v_{k+1} − v_k‖`.
    pub differences: Vec<f64>,
    pub diverged: bool,
}

fn ser_vec<S: Serializer>(v: &ComplexVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

fn trace(params: Vec<f64>, iterates: Vec<ComplexVector>) -> LimitTrace {
    let differences: Vec<f64> =
        iterates.windows(2).map(|w| vec_norm(&(&w[1] - &w[0]))).collect();
    let scale = iterates.iter().map(vec_norm).fold(0.0, f64::max);
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let nonfinite = iterates.iter().any(|v| v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())));
    // Diverging: the last step is above roundoff and larger than the one before.
    let growing = differences.len() >= 2 && {
        let k = differences.len();
        differences[k - 1] > floor && differences[k - 1] > differences[k - 2]
    };
    LimitTrace {
        value: iterates.last().cloned().unwrap_or_else(|| Array1::zeros(0)),
        parameters: params,
        differences,
        diverged: nonfinite || growing,
    }
}

/// `t = 10⁰, 10⁻¹, …, 10⁻¹²`.
pub fn default_t_sequence() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powi(-k)).collect()
}

/// `λ = 10⁰, 10¹, …, 10¹²`.
pub fn default_lambda_sequence() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powi(k)).collect()
}

/// `(1/t) C ∫₀^t T(τ)x dτ` along a decreasing sequence of `t`.
pub fn lebesgue_limit(gen: &Generator, cop: &ObservationOperator, x: &ComplexVector, ts: &[f64]) -> Result<LimitTrace> {
    cop.check_against(gen)?;
    if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0)) || ts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("t sequence must be positive and strictly decreasing".into()));
    }
    let mut iterates = Vec::with_capacity(ts.len());
    for &t in ts {
        let avg: ComplexVector = match gen.kind() {
            GeneratorKind::Diagonal(eig) => {
                Array1::from_shape_fn(x.len(), |i| phi1(eig[i] * t) * x[i])
            }
            GeneratorKind::Dense(a) => exp_integral(a, t)?.dot(x).mapv(|z| z / t),
        };
        iterates.push(cop.matrix().dot(&avg));
    }
    Ok(trace(ts.to_vec(), iterates))
}

/// `λ C (λI − A)⁻¹ x` along an increasing sequence of real `λ > 0`.
pub fn lambda_limit(gen: &Generator, cop: &ObservationOperator, x: &ComplexVector, lambdas: &[f64]) -> Result<LimitTrace> {
    cop.check_against(gen)?;
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("λ sequence must be positive and strictly increasing".into()));
    }
    let mut iterates = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let r = resolvent(gen, c(l, 0.0))?;
        iterates.push(cop.matrix().dot(&r.dot(x)).mapv(|z| z * l));
    }
    Ok(trace(lambdas.to_vec(), iterates))
}

/// `‖A‖₁`-scaled helper for callers choosing sequences.
pub fn generator_scale(gen: &Generator) -> f64 {
    match gen.kind() {
        GeneratorKind::Diagonal(_) => gen.norm_bound(),
        GeneratorKind::Dense(a) => norm_one(a),
    }
}

/// `Array2` view of a vector as a single column, for CSV export.
pub fn column(v: &ComplexVector) -> Array2<Complex64> {
    v.clone().insert_axis(ndarray::Axis(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{from_real_rows, identity, max_abs, real_diag};
    use crate::semigroup::{example26, random_dissipative, random_stable};

    #[test]
    fn gramian_examples() {
        let (g, cop) = example26(12).unwrap();
        let r = observability_gramian(&g, &cop).unwrap();
        assert!(max_abs(&(&r.q - &real_diag(&[0.5; 12]))) < 1e-15);
        assert!((r.m_admissible - 0.5).abs() < 1e-12 && (r.m_exact - 0.5).abs() < 1e-12);
        assert!(r.quadrature_mismatch < 1e-4);

        let zero = ObservationOperator::new(Array2::zeros((2, 3)));
        let d = random_stable(3, 2).unwrap();
        let r = observability_gramian(&d, &zero).unwrap();
        assert_eq!(max_abs(&r.q), 0.0);
        assert_eq!(r.quadrature_mismatch, 0.0);

        let half = Generator::dense(real_diag(&[-0.5, -0.5]).mapv(|z| z)).unwrap();
        let r = observability_gramian(&half, &ObservationOperator::identity(2)).unwrap();
        assert!((r.m_admissible - 1.0).abs() < 1e-12 && (r.m_exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gramian_quadrature_dense() {
        let d = random_stable(5, 13).unwrap();
        let cop = ObservationOperator::new(from_real_rows(&[&[1.0, 0.0, 2.0, 0.0, -1.0]]));
        let r = observability_gramian(&d, &cop).unwrap();
        assert!(r.quadrature_mismatch < 1e-6, "{}", r.quadrature_mismatch);
        assert!(r.m_exact <= r.m_admissible);
    }

    #[test]
    fn commuting_examples() {
        let (g, cop) = example26(5).unwrap();
        let r = commuting_check(&g, &cop).unwrap();
        assert!(r.pass && r.bound_measured == 0.0);
        let d = random_stable(4, 5).unwrap();
        let a = d.matrix();
        let p = a.dot(&a) + a.mapv(|z| z * 2.0) + identity(4).mapv(|z| z * 3.0);
        assert!(commuting_check(&d, &ObservationOperator::new(p)).unwrap().pass);
        let generic = from_real_rows(&[&[1.0, 2.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[3.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 0.0, 0.0]]);
        assert!(!commuting_check(&d, &ObservationOperator::new(generic)).unwrap().pass);
    }

    #[test]
    fn sqrt_t_examples() {
        let (g, cop) = example26(64).unwrap();
        let (gamma, r) = sqrt_t_bound_scan(&g, &cop, 1e-6, 10.0).unwrap();
        assert!(r.pass);
        assert!(gamma >= (-1f64).exp());
        let sup = (-0.5f64).exp() / 2f64.sqrt();
        assert!(gamma <= sup + 1e-12 && gamma > sup - 1e-6, "{gamma}");
        let d = random_dissipative(3, 1).unwrap();
        let (gamma, r) = sqrt_t_bound_scan(&d, &ObservationOperator::identity(3), 1e-6, 1.0).unwrap();
        assert!(r.pass && gamma <= 1.0);
    }

    #[test]
    fn sqrt_minus_a_examples() {
        let (g, cop) = example26(7).unwrap();
        assert_eq!(sqrt_minus_a(&g).unwrap(), cop);
        let g = Generator::diagonal(vec![c(-4.0, 0.0)]).unwrap();
        assert_eq!(sqrt_minus_a(&g).unwrap().matrix()[[0, 0]], c(2.0, 0.0));
        let h = from_real_rows(&[&[-3.0, 1.0, 0.0], &[1.0, -2.0, 0.5], &[0.0, 0.5, -1.0]]);
        let gen = Generator::dense(h.clone()).unwrap();
        let s = sqrt_minus_a(&gen).unwrap();
        assert!(max_abs(&(s.matrix().dot(s.matrix()) + &h)) < 1e-10);
        let rot = Generator::diagonal(vec![c(-1.0, 2.0)]).unwrap();
        assert!(matches!(sqrt_minus_a(&rot), Err(Error::NonRealSpectrum(_))));
    }

    #[test]
    fn limit_examples() {
        let (g, cop) = example26(16).unwrap();
        let x = probe_vectors(16, 1, 3).pop().unwrap();
        let cx = cop.matrix().dot(&x);
        let leb = lebesgue_limit(&g, &cop, &x, &default_t_sequence()).unwrap();
        let lam = lambda_limit(&g, &cop, &x, &default_lambda_sequence()).unwrap();
        assert!(!leb.diverged && !lam.diverged);
        assert!(vec_norm(&(&leb.value - &cx)) < 1e-6);
        assert!(vec_norm(&(&lam.value - &cx)) < 1e-6);
        let zero = Array1::zeros(16);
        assert_eq!(vec_norm(&lebesgue_limit(&g, &cop, &zero, &default_t_sequence()).unwrap().value), 0.0);

        let one = Generator::diagonal(vec![c(-1.0, 0.0)]).unwrap();
        let r = lambda_limit(&one, &ObservationOperator::identity(1), &ndarray::arr1(&[c(1.0, 0.0)]), &[1.0, 10.0, 1e6]).unwrap();
        assert!((r.value[0] - c(1e6 / (1e6 + 1.0), 0.0)).norm() < 1e-15);

        let d = random_stable(3, 6).unwrap();
        let cop = ObservationOperator::identity(3);
        let x = probe_vectors(3, 1, 4).pop().unwrap();
        let leb = lebesgue_limit(&d, &cop, &x, &default_t_sequence()).unwrap();
        assert!(vec_norm(&(&leb.value - &x)) < 1e-9);
    }

    #[test]
    fn lambda_commutes_with_inverse() {
        let d = random_stable(4, 7).unwrap();
        let cm = d.matrix().dot(&d.matrix());
        let cop = ObservationOperator::new(cm);
        let ainv = inverse(&d.matrix()).unwrap();
        let x = probe_vectors(4, 1, 8).pop().unwrap();
        let lhs = ainv.dot(&lambda_limit(&d, &cop, &x, &default_lambda_sequence()).unwrap().value);
        let rhs = lambda_limit(&d, &cop, &ainv.dot(&x), &default_lambda_sequence()).unwrap().value;
        assert!(vec_norm(&(lhs - rhs)) < 1e-9);
    }
}
