//! Stable generators `A` and their semigroups `T(t) = e^{At}`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admissibility::ObservationOperator;
use crate::error::{Error, Result};
use crate::numkernel::{
    self, adjoint, c, cholesky, diag, hermitian_eigs, identity, is_diagonal, linear_solve,
    lyapunov_residual, mat_exp, op_norm, solve_lyapunov, ComplexMatrix, ONE,
};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    Diagonal(Vec<Complex64>),
    Dense(ComplexMatrix),
}

/// Witness that `A` generates an exponentially stable semigroup:
/// `AᴴP + PA = −I` with `P ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub p: ComplexMatrix,
    /// Certified decay rate `1/(2 λ_max(P))`: `‖T(t)‖ ≤ κ e^{−margin·t}`.
    pub margin: f64,
    pub residual: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl StabilityCertificate {
    /// Transient bound `κ = sqrt(λ_max(P)/λ_min(P)) ≥ sup_t ‖T(t)‖`.
    pub fn kappa(&self) -> f64 {
        (self.p_max / self.p_min).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    kind: GeneratorKind,
    certificate: StabilityCertificate,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupBounds {
    /// `max ‖T(t)‖` over `t ∈ {0, 0.01, …, 1}`.
    pub m: f64,
    pub decay_horizon: f64,
}

pub fn certify_stable(a: &ComplexMatrix) -> Result<StabilityCertificate> {
    let n = numkernel::ensure_square(a)?;
    let id = identity(n);
    let p = solve_lyapunov(a, &id)
        .map_err(|e| Error::NotStable(format!("Lyapunov solve failed: {e}")))?;
    cholesky(&p).map_err(|_| Error::NotStable("Lyapunov solution is not positive definite".into()))?;
    let spec = hermitian_eigs(&p)?;
    if spec.min() <= 0.0 {
        return Err(Error::NotStable("Lyapunov solution is not positive definite".into()));
    }
    let residual = lyapunov_residual(a, &p, &id);
    if residual > 1e-9 * (1.0 + numkernel::norm_fro(a) * numkernel::norm_fro(&p)) {
        return Err(Error::NotStable(format!("Lyapunov residual {residual:.3e} too large")));
    }
    Ok(StabilityCertificate {
        margin: 1.0 / (2.0 * spec.max()),
        residual,
        p_min: spec.min(),
        p_max: spec.max(),
        p,
    })
}

impl Generator {
    pub fn diagonal(eigenvalues: Vec<Complex64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::NotStable("empty generator".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.re < 0.0) || !l.im.is_finite()) {
            return Err(Error::NotStable(format!("eigenvalue {bad} has Re ≥ 0")));
        }
        let certificate = certify_stable(&diag(&eigenvalues))?;
        Ok(Self { kind: GeneratorKind::Diagonal(eigenvalues), certificate, seed: None })
    }

    pub fn dense(matrix: ComplexMatrix) -> Result<Self> {
        if !numkernel::is_finite(&matrix) {
            return Err(Error::NotStable("non-finite entries".into()));
        }
        let certificate = certify_stable(&matrix)?;
        Ok(Self { kind: GeneratorKind::Dense(matrix), certificate, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn certificate(&self) -> &StabilityCertificate {
        &self.certificate
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::Diagonal(e) => e.len(),
            GeneratorKind::Dense(m) => m.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, GeneratorKind::Diagonal(_))
    }

    pub fn eigenvalues(&self) -> Option<&[Complex64]> {
        match &self.kind {
            GeneratorKind::Diagonal(e) => Some(e),
            GeneratorKind::Dense(_) => None,
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        match &self.kind {
            GeneratorKind::Diagonal(e) => diag(e),
            GeneratorKind::Dense(m) => m.clone(),
        }
    }

    /// The adjoint generator `Aᴴ` (generates `T(t)ᴴ`).
    pub fn adjoint(&self) -> Result<Self> {
        let g = match &self.kind {
            GeneratorKind::Diagonal(e) => Self::diagonal(e.iter().map(|z| z.conj()).collect())?,
            GeneratorKind::Dense(m) => Self::dense(adjoint(m))?,
        };
        Ok(Self { seed: self.seed, ..g })
    }

    /// `A + σI`, re-certified.
    pub fn shifted(&self, sigma: f64) -> Result<Self> {
        let g = match &self.kind {
            GeneratorKind::Diagonal(e) => Self::diagonal(e.iter().map(|z| z + sigma).collect())?,
            GeneratorKind::Dense(m) => Self::dense(m + &Array2::from_diag_elem(m.nrows(), c(sigma, 0.0)))?,
        };
        Ok(Self { seed: self.seed, ..g })
    }

    /// Upper bound on the spectral radius, `‖A‖₁`.
    pub fn norm_bound(&self) -> f64 {
        match &self.kind {
            GeneratorKind::Diagonal(e) => e.iter().map(|z| z.norm()).fold(0.0, f64::max),
            GeneratorKind::Dense(m) => numkernel::norm_one(m),
        }
    }

    /// `(κ, ρ)` with `‖T(t)‖ ≤ κ e^{−ρt}`.
    pub fn decay_envelope(&self) -> (f64, f64) {
        match &self.kind {
            GeneratorKind::Diagonal(e) => {
                (1.0, e.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min))
            }
            GeneratorKind::Dense(_) => (self.certificate.kappa(), self.certificate.margin),
        }
    }
}

pub fn evaluate_t(gen: &Generator, t: f64) -> Result<ComplexMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    match &gen.kind {
        GeneratorKind::Diagonal(e) => {
            Ok(diag(&e.iter().map(|l| (l * t).exp()).collect::<Vec<_>>()))
        }
        GeneratorKind::Dense(m) => mat_exp(m, t),
    }
}

/// `(sI − A)⁻¹`.
pub fn resolvent(gen: &Generator, s: Complex64) -> Result<ComplexMatrix> {
    match &gen.kind {
        GeneratorKind::Diagonal(e) => {
            let scale = gen.norm_bound().max(s.norm()).max(1.0);
            let mut out = Vec::with_capacity(e.len());
            for l in e {
                let d = s - l;
                if d.norm() <= 1e-14 * scale {
                    return Err(Error::Singular);
                }
                out.push(ONE / d);
            }
            Ok(diag(&out))
        }
        GeneratorKind::Dense(m) => {
            let n = m.nrows();
            let shifted = Array2::from_diag_elem(n, s) - m;
            linear_solve(&shifted, &identity(n))
        }
    }
}

/// The diagonal heat-type generator `A = diag(−n²)` with `C = diag(n)`, the
/// square root of `−A`, truncated to `n = 1..=modes`.
pub fn example26(modes: usize) -> Result<(Generator, ObservationOperator)> {
    if modes == 0 {
        return Err(Error::NotStable("at least one mode is required".into()));
    }
    let eig: Vec<Complex64> = (1..=modes).map(|k| c(-((k * k) as f64), 0.0)).collect();
    let cm = diag(&(1..=modes).map(|k| c(k as f64, 0.0)).collect::<Vec<_>>());
    Ok((Generator::diagonal(eig)?, ObservationOperator::new(cm)))
}

fn complex_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * s, im * s)
    })
}

/// Draws `(W, H)`: `W` skew-Hermitian, `H = 0.1 I + B Bᴴ / n` Hermitian with
/// `λ_min(H) ≥ 0.1`. Stream: ChaCha8 seeded with `seed`, entries are standard
/// complex normals drawn row-major, `G` for `W` first then `B`.
fn draw_skew_and_damping(rng: &mut ChaCha8Rng, n: usize) -> (ComplexMatrix, ComplexMatrix) {
    let g = complex_gaussian(rng, n, n);
    let w = (&g - &adjoint(&g)).mapv(|z| z * 0.5);
    let b = complex_gaussian(rng, n, n);
    let h = b.dot(&adjoint(&b)).mapv(|z| z / n as f64)
        + Array2::from_diag_elem(n, c(0.1, 0.0));
    (w, numkernel::hermitian_part(&h))
}

/// `A = W − H`: dissipative with `λ_max((A + Aᴴ)/2) ≤ −0.1`.
pub fn random_dissipative(n: usize, seed: u64) -> Result<Generator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = draw_skew_and_damping(&mut rng, n);
    Ok(Generator::dense(&w - &h)?.with_seed(seed))
}

/// `A = V (W − H) V⁻¹` with `cond(V) ≤ 100`; `spread` scales the random
/// part of `V = I + spread·G/√n` (zero gives `random_dissipative`).
pub fn random_stable_with(n: usize, seed: u64, spread: f64) -> Result<Generator> {
    let mut last_err = Error::NotStable("no attempt made".into());
    for attempt in 0..5u64 {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (w, h) = draw_skew_and_damping(&mut rng, n);
        let base = &w - &h;
        let mut v = identity(n);
        if spread > 0.0 {
            let mut found = false;
            for _ in 0..20 {
                let g = complex_gaussian(&mut rng, n, n);
                let cand = identity(n) + g.mapv(|z| z * (spread / (n as f64).sqrt()));
                let sv = hermitian_eigs(&adjoint(&cand).dot(&cand))?;
                if sv.min() > 0.0 && (sv.max() / sv.min()).sqrt() <= 100.0 {
                    v = cand;
                    found = true;
                    break;
                }
            }
            if !found {
                last_err = Error::NotStable("could not draw a well-conditioned similarity".into());
                continue;
            }
        }
        let vinv = numkernel::inverse(&v)?;
        let a = v.dot(&base).dot(&vinv);
        match Generator::dense(a) {
            Ok(g) => return Ok(g.with_seed(s)),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Non-normal stable generator, similarity spread 0.5.
pub fn random_stable(n: usize, seed: u64) -> Result<Generator> {
    random_stable_with(n, seed, 0.5)
}

pub fn norm_t(gen: &Generator, t: f64) -> Result<f64> {
    match &gen.kind {
        GeneratorKind::Diagonal(e) => {
            Ok(e.iter().map(|l| (l.re * t).exp()).fold(0.0, f64::max))
        }
        GeneratorKind::Dense(_) => Ok(op_norm(&evaluate_t(gen, t)?)),
    }
}

pub fn semigroup_bounds(gen: &Generator, eps: f64) -> Result<SemigroupBounds> {
    let mut m: f64 = 0.0;
    for k in 0..=100 {
        m = m.max(norm_t(gen, k as f64 * 0.01)?);
    }
    let mut hi = 1.0;
    while norm_t(gen, hi)? > eps {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::HorizonExceeded);
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if norm_t(gen, mid)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SemigroupBounds { m: m.max(1.0), decay_horizon: hi })
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKindTag {
    Diagonal,
    Dense,
}

/// `{kind, eigenvalues | matrix, seed}`; complex numbers are `[re, im]`,
/// the matrix is a list of rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GeneratorDoc {
    pub kind: GeneratorKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    m.rows().into_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Array2::from_shape_fn((n, m), |(i, j)| c(rows[i][j][0], rows[i][j][1])))
}

impl Generator {
    pub fn to_doc(&self) -> GeneratorDoc {
        match &self.kind {
            GeneratorKind::Diagonal(e) => GeneratorDoc {
                kind: GeneratorKindTag::Diagonal,
                eigenvalues: Some(e.iter().map(|z| [z.re, z.im]).collect()),
                matrix: None,
                seed: self.seed,
            },
            GeneratorKind::Dense(m) => GeneratorDoc {
                kind: GeneratorKindTag::Dense,
                eigenvalues: None,
                matrix: Some(matrix_to_rows(m)),
                seed: self.seed,
            },
        }
    }

    pub fn from_doc(doc: &GeneratorDoc) -> Result<Self> {
        let g = match doc.kind {
            GeneratorKindTag::Diagonal => {
                let e = doc
                    .eigenvalues
                    .as_ref()
                    .ok_or_else(|| Error::Config("diagonal generator needs eigenvalues".into()))?;
                Self::diagonal(e.iter().map(|p| c(p[0], p[1])).collect())?
            }
            GeneratorKindTag::Dense => {
                let rows = doc
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Config("dense generator needs a matrix".into()))?;
                Self::dense(rows_to_matrix(rows)?)?
            }
        };
        Ok(Self { seed: doc.seed, ..g })
    }
}

/// True when the generator has real spectrum in the sense needed for
/// `(−A)^{1/2}`: diagonal with real eigenvalues, or dense Hermitian.
pub fn has_real_negative_spectrum(gen: &Generator) -> bool {
    match &gen.kind {
        GeneratorKind::Diagonal(e) => e.iter().all(|z| z.im == 0.0 && z.re < 0.0),
        GeneratorKind::Dense(m) => {
            numkernel::hermitian_defect(m) <= 1e-12 * numkernel::norm_fro(m).max(1.0)
                && !is_diagonal(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{from_real_rows, max_abs, real_diag};

    #[test]
    fn certify_examples() {
        let cert = certify_stable(&real_diag(&[-1.0, -1.0])).unwrap();
        assert!(max_abs(&(&cert.p - &real_diag(&[0.5, 0.5]))) < 1e-15);
        let cert = certify_stable(&real_diag(&[-1.0, -2.0])).unwrap();
        assert!(max_abs(&(&cert.p - &real_diag(&[0.5, 0.25]))) < 1e-15);
        let skew = from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(certify_stable(&skew), Err(Error::NotStable(_))));
        assert!(Generator::dense(skew).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let (g, _) = example26(3).unwrap();
        let t1 = evaluate_t(&g, 1.0).unwrap();
        let expected = real_diag(&[(-1f64).exp(), (-4f64).exp(), (-9f64).exp()]);
        assert!(max_abs(&(&t1 - &expected)) < 1e-16);
        assert!(max_abs(&(evaluate_t(&g, 0.0).unwrap() - identity(3))) == 0.0);
        let j = Generator::dense(from_real_rows(&[&[-1.0, 1.0], &[0.0, -1.0]])).unwrap();
        let e = (-1f64).exp();
        let expected = from_real_rows(&[&[e, e], &[0.0, e]]);
        assert!(max_abs(&(evaluate_t(&j, 1.0).unwrap() - expected)) < 1e-15);
        assert!(matches!(evaluate_t(&g, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn resolvent_examples() {
        let g = Generator::diagonal(vec![c(-1.0, 0.0)]).unwrap();
        assert!((resolvent(&g, c(2.0, 0.0)).unwrap()[[0, 0]] - c(1.0 / 3.0, 0.0)).norm() < 1e-16);
        let (g2, _) = example26(2).unwrap();
        let r0 = resolvent(&g2, c(0.0, 0.0)).unwrap();
        assert!(max_abs(&(r0 - real_diag(&[1.0, 0.25]))) < 1e-16);
        let d = random_stable(5, 3).unwrap();
        let r = resolvent(&d, c(1.0, 0.0)).unwrap();
        let check = (identity(5) - d.matrix()).dot(&r);
        assert!(max_abs(&(check - identity(5))) < 1e-10);
    }

    #[test]
    fn example26_structure() {
        let (g, cop) = example26(1).unwrap();
        assert_eq!(g.eigenvalues().unwrap(), &[c(-1.0, 0.0)]);
        assert_eq!(cop.matrix()[[0, 0]], c(1.0, 0.0));
        let (g, cop) = example26(5).unwrap();
        let c2 = cop.matrix().dot(cop.matrix());
        assert!(max_abs(&(c2 + g.matrix())) == 0.0);
    }

    #[test]
    fn dissipative_samples() {
        for seed in 0..10 {
            let g = random_dissipative(4, seed).unwrap();
            let a = g.matrix();
            let sym = numkernel::hermitian_part(&a);
            assert!(hermitian_eigs(&sym).unwrap().max() <= -0.1 + 1e-12);
        }
        let g = random_dissipative(1, 9).unwrap();
        assert!(g.matrix()[[0, 0]].re < 0.0);
    }

    #[test]
    fn stable_with_identity_similarity_is_dissipative_sampler() {
        let a = random_stable_with(4, 11, 0.0).unwrap();
        let b = random_dissipative(4, 11).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-14);
    }

    #[test]
    fn bounds_examples() {
        let g = Generator::diagonal(vec![c(-1.0, 0.0)]).unwrap();
        let b = semigroup_bounds(&g, 1e-12).unwrap();
        assert_eq!(b.m, 1.0);
        assert!((b.decay_horizon - 1e12f64.ln()).abs() < 1e-6);
        let (g, _) = example26(8).unwrap();
        assert_eq!(semigroup_bounds(&g, 1e-6).unwrap().m, 1.0);
        // ‖e^{Jt}‖ = e^{−t}(t/2 + sqrt(1 + t²/4)) peaks at t = 0.
        let j = Generator::dense(from_real_rows(&[&[-1.0, 1.0], &[0.0, -1.0]])).unwrap();
        assert!((semigroup_bounds(&j, 1e-6).unwrap().m - 1.0).abs() < 1e-12);
        // With coupling 4 the norm first grows like 1 + t.
        let j4 = Generator::dense(from_real_rows(&[&[-1.0, 4.0], &[0.0, -1.0]])).unwrap();
        let b = semigroup_bounds(&j4, 1e-6).unwrap();
        let exact = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.01;
                (-t).exp() * (2.0 * t + (1.0 + 4.0 * t * t).sqrt())
            })
            .fold(0.0, f64::max);
        assert!(b.m > 1.0 && (b.m - exact).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let g = random_stable(3, 5).unwrap();
        let text = serde_json::to_string(&g.to_doc()).unwrap();
        let back: GeneratorDoc = serde_json::from_str(&text).unwrap();
        let h = Generator::from_doc(&back).unwrap();
        assert_eq!(g.matrix(), h.matrix());
        assert_eq!(h.seed(), Some(5));
    }
}
