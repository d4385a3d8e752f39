//! Dense complex linear algebra used by every other module.
//!
//! Everything here is a pure function of its inputs. Matrices are small
//! (dimension at most a few dozen), so the algorithms favour determinism and
//! simplicity over asymptotic speed.

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = Array2<Complex64>;
pub type ComplexVector = Array1<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_diag_elem(n, ONE)
}

pub fn diag(entries: &[Complex64]) -> ComplexMatrix {
    Array2::from_diag(&Array1::from(entries.to_vec()))
}

pub fn real_diag(entries: &[f64]) -> ComplexMatrix {
    let v: Vec<Complex64> = entries.iter().map(|&x| c(x, 0.0)).collect();
    diag(&v)
}

/// Builds a matrix from row-major real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((n, m), |(i, j)| c(rows[i][j], 0.0))
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    let (r, cl) = m.dim();
    if r != cl {
        return Err(Error::NotSquare { rows: r, cols: cl });
    }
    Ok(r)
}

pub fn is_diagonal(m: &ComplexMatrix) -> bool {
    m.indexed_iter()
        .all(|((i, j), z)| i == j || (z.re == 0.0 && z.im == 0.0))
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn norm_fro(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &ComplexVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn norm_one(m: &ComplexMatrix) -> f64 {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - &adjoint(m)))
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + &adjoint(m)).mapv(|z| z * 0.5)
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norms for which the degree-m diagonal Padé approximant has
// backward error below the unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Norms beyond this are rejected rather than squared hundreds of times.
const EXP_NORM_LIMIT: f64 = 1e12;

pub fn scaled_identity(n: usize, s: f64) -> ComplexMatrix {
    Array2::from_diag_elem(n, c(s, 0.0))
}

fn pade_low(a: &ComplexMatrix, coeffs: &[f64]) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut powers = vec![identity(n)];
    let degree = coeffs.len() - 1;
    for _ in 0..degree / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::zeros((n, n));
    let mut v = Array2::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        let even = 2 * k;
        let odd = 2 * k + 1;
        if even <= degree {
            v = v + p.mapv(|z| z * coeffs[even]);
        }
        if odd <= degree {
            u_inner = u_inner + p.mapv(|z| z * coeffs[odd]);
        }
    }
    (a.dot(&u_inner), v)
}

fn pade13(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let n = a.nrows();
    let b = &PADE13;
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let id = identity(n);
    let sc = |m: &ComplexMatrix, s: f64| m.mapv(|z| z * s);

    let u_hi = sc(&a6, b[13]) + sc(&a4, b[11]) + sc(&a2, b[9]);
    let u_inner = a6.dot(&u_hi) + sc(&a6, b[7]) + sc(&a4, b[5]) + sc(&a2, b[3]) + sc(&id, b[1]);
    let u = a.dot(&u_inner);

    let v_hi = sc(&a6, b[12]) + sc(&a4, b[10]) + sc(&a2, b[8]);
    let v = a6.dot(&v_hi) + sc(&a6, b[6]) + sc(&a4, b[4]) + sc(&a2, b[2]) + sc(&id, b[0]);
    (u, v)
}

/// `e^{A t}` by scaling and squaring with a diagonal Padé approximant whose
/// degree (3, 5, 7, 9 or 13) and scaling power are chosen from `‖A t‖₁`.
pub fn mat_exp(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let n = ensure_square(a)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let at = a.mapv(|z| z * t);
    let norm = norm_one(&at);
    if !norm.is_finite() || norm > EXP_NORM_LIMIT {
        return Err(Error::ExpOverflow(norm));
    }
    if norm == 0.0 {
        return Ok(identity(n));
    }

    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(&at, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(&at, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(&at, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(&at, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let scaled = at.mapv(|z| z * 2f64.powi(-s));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = linear_solve(&denom, &numer)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// `∫₀^t e^{Aτ} dτ` from the upper-right block of the exponential of the
/// augmented matrix `[[A t, I t], [0, 0]]`. No cancellation as `t → 0`.
pub fn exp_integral(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let n = ensure_square(a)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let mut big = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            big[[i, j]] = a[[i, j]];
        }
        big[[i, n + i]] = ONE;
    }
    let e = mat_exp(&big, t)?;
    Ok(e.slice(ndarray::s![0..n, n..2 * n]).to_owned())
}

/// Scalar `(e^z − 1)/z`, accurate near zero.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // Taylor series; 30 terms is far below roundoff for |z| < 1/2.
        let mut term = ONE;
        let mut sum = ONE;
        for k in 2..32 {
            term = term * z / (k as f64);
            sum += term;
        }
        sum
    } else {
        (z.exp() - ONE) / z
    }
}

// ---------------------------------------------------------------------------
// Linear systems
// ---------------------------------------------------------------------------

/// Solves `M X = B` by LU factorization with partial pivoting.
pub fn linear_solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "system matrix is {n}x{n} but right-hand side has {} rows",
            b.nrows()
        )));
    }
    let scale = max_abs(m);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Singular);
    }
    let mut lu = m.clone();
    let mut x = b.clone();
    let k = x.ncols();
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, lu[[r, col]].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= 1e-14 * scale * (n as f64) {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                lu.swap([col, j], [piv, j]);
            }
            for j in 0..k {
                x.swap([col, j], [piv, j]);
            }
        }
        let inv = ONE / lu[[col, col]];
        for r in col + 1..n {
            let f = lu[[r, col]] * inv;
            if f == ZERO {
                continue;
            }
            lu[[r, col]] = f;
            for j in col + 1..n {
                let v = lu[[col, j]];
                lu[[r, j]] -= f * v;
            }
            for j in 0..k {
                let v = x[[col, j]];
                x[[r, j]] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = ONE / lu[[col, col]];
        for j in 0..k {
            let mut acc = x[[col, j]];
            for c2 in col + 1..n {
                acc -= lu[[col, c2]] * x[[c2, j]];
            }
            x[[col, j]] = acc * inv;
        }
    }
    Ok(x)
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    linear_solve(m, &identity(n))
}

// ---------------------------------------------------------------------------
// Lyapunov equation
// ---------------------------------------------------------------------------

/// Solves `Aᴴ Q + Q A = −R` for Hermitian `R`.
///
/// Diagonal `A` is solved entrywise; otherwise the n²×n² Kronecker system is
/// assembled and factored directly.
pub fn solve_lyapunov(a: &ComplexMatrix, r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(a)?;
    if r.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{n} but R is {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let r_norm = norm_fro(r);
    if hermitian_defect(r) > 1e-12 * r_norm.max(1.0) {
        return Err(Error::NotHermitian(hermitian_defect(r)));
    }

    let q = if is_diagonal(a) {
        let scale = max_abs(a).max(f64::MIN_POSITIVE);
        let mut q = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let d = a[[i, i]].conj() + a[[j, j]];
                if d.norm() <= 1e-14 * scale {
                    return Err(Error::Singular);
                }
                q[[i, j]] = -r[[i, j]] / d;
            }
        }
        q
    } else {
        // Column-major vec: unknown index i + j n holds Q_ij.
        let nn = n * n;
        let mut k = Array2::<Complex64>::zeros((nn, nn));
        let mut rhs = Array2::<Complex64>::zeros((nn, 1));
        for j in 0..n {
            for i in 0..n {
                let row = i + j * n;
                rhs[[row, 0]] = -r[[i, j]];
                for l in 0..n {
                    // (Aᴴ Q)_ij = Σ_l conj(A_li) Q_lj
                    k[[row, l + j * n]] += a[[l, i]].conj();
                    // (Q A)_ij = Σ_l Q_il A_lj
                    k[[row, i + l * n]] += a[[l, j]];
                }
            }
        }
        let sol = linear_solve(&k, &rhs)?;
        Array2::from_shape_fn((n, n), |(i, j)| sol[[i + j * n, 0]])
    };

    let q = hermitian_part(&q);
    let residual = norm_fro(&(adjoint(a).dot(&q) + q.dot(a) + r));
    let allowed = 1e-10 * (r_norm + 2.0 * norm_fro(a) * norm_fro(&q)).max(f64::MIN_POSITIVE);
    if !is_finite(&q) || residual > allowed {
        return Err(Error::Singular);
    }
    Ok(q)
}

/// Residual `‖AᴴQ + QA + R‖_F`.
pub fn lyapunov_residual(a: &ComplexMatrix, q: &ComplexMatrix, r: &ComplexMatrix) -> f64 {
    norm_fro(&(adjoint(a).dot(q) + q.dot(a) + r))
}

// ---------------------------------------------------------------------------
// Operator norm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `MᴴM`.
///
/// Starts from the normalized all-ones vector and, independently, from the
/// all-ones vector plus the alternating ramp `p_k = (−1)^k (k+1)/n`; the
/// larger converged Rayleigh quotient wins. Diagonal inputs are read off.
pub fn operator_norm(m: &ComplexMatrix) -> NormEstimate {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    if rows == cols && is_diagonal(m) {
        let value = (0..rows).map(|i| m[[i, i]].norm()).fold(0.0, f64::max);
        return NormEstimate { value, iterations: 0, converged: true };
    }
    let gram = adjoint(m).dot(m);
    let ones = Array1::from_elem(cols, ONE);
    let ramp = Array1::from_shape_fn(cols, |k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        ONE + c(sign * (k as f64 + 1.0) / cols as f64, 0.0)
    });
    let a = power_iterate(&gram, ones);
    let b = power_iterate(&gram, ramp);
    let best = if b.0 > a.0 { b } else { a };
    NormEstimate {
        value: best.0.max(0.0).sqrt(),
        iterations: a.1 + b.1,
        converged: a.2 && b.2,
    }
}

pub fn op_norm(m: &ComplexMatrix) -> f64 {
    operator_norm(m).value
}

fn power_iterate(gram: &ComplexMatrix, start: ComplexVector) -> (f64, usize, bool) {
    let mut v = start;
    let nv = vec_norm(&v);
    if nv == 0.0 {
        return (0.0, 0, true);
    }
    v.mapv_inplace(|z| z / nv);
    let mut mu_prev = f64::NAN;
    for it in 1..=POWER_MAX_ITER {
        let w = gram.dot(&v);
        let mu = v.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let nw = vec_norm(&w);
        if nw == 0.0 {
            return (0.0, it, true);
        }
        if (mu - mu_prev).abs() <= POWER_TOL * mu.abs() {
            return (mu, it, true);
        }
        mu_prev = mu;
        v = w.mapv(|z| z / nw);
    }
    (mu_prev, POWER_MAX_ITER, false)
}

// ---------------------------------------------------------------------------
// Hermitian eigenvalues
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column k is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
    /// `max_k ‖H v_k − λ_k v_k‖`.
    pub residual: f64,
}

impl HermitianSpectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) Vᴴ`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let d: Vec<Complex64> = self.eigenvalues.iter().map(|&l| c(f(l), 0.0)).collect();
        v.dot(&diag(&d)).dot(&adjoint(v))
    }
}

/// All eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
pub fn hermitian_eigs(h: &ComplexMatrix) -> Result<HermitianSpectrum> {
    let n = ensure_square(h)?;
    let scale = norm_fro(h);
    let defect = hermitian_defect(h);
    if defect > 1e-12 * scale.max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let mut a = hermitian_part(h);
    let mut v = identity(n);
    let target = 1e-12 * scale;

    for _sweep in 0..100 {
        let off: f64 = a
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // G = diag(1, conj(phase)) · [[cs, sn], [-sn, cs]]
                let g00 = c(cs, 0.0);
                let g01 = c(sn, 0.0);
                let g10 = phase.conj() * (-sn);
                let g11 = phase.conj() * cs;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * g00 + akq * g10;
                    a[[k, q]] = akp * g01 + akq * g11;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = g00.conj() * apk + g10.conj() * aqk;
                    a[[q, k]] = g01.conj() * apk + g11.conj() * aqk;
                }
                a[[p, q]] = ZERO;
                a[[q, p]] = ZERO;
                a[[p, p]] = c(a[[p, p]].re, 0.0);
                a[[q, q]] = c(a[[q, q]].re, 0.0);
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * g00 + vkq * g10;
                    v[[k, q]] = vkp * g01 + vkq * g11;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.total_cmp(&a[[j, j]].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]].re).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(r, k)| v[[r, order[k]]]);

    let hv = h.dot(&eigenvectors);
    let residual = (0..n)
        .map(|k| {
            (0..n)
                .map(|r| (hv[[r, k]] - eigenvectors[[r, k]] * eigenvalues[k]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    Ok(HermitianSpectrum { eigenvalues, eigenvectors, residual })
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues down to `−1e-12·‖H‖` are clamped to zero.
pub fn hermitian_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = hermitian_eigs(h)?;
    let floor = -1e-12 * norm_fro(h).max(f64::MIN_POSITIVE);
    if spec.min() < floor {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(spec.apply_fn(|l| l.max(0.0).sqrt()))
}

/// Cholesky factor `L` with `H = L Lᴴ`; fails unless `H ≻ 0`.
pub fn cholesky(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = ensure_square(h)?;
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut d = h[[j, j]].re;
        for k in 0..j {
            d -= l[[j, k]].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[[j, j]] = c(djj, 0.0);
        for i in j + 1..n {
            let mut s = h[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}
