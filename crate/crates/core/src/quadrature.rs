//! Composite Simpson quadrature on geometrically growing panels.
//!
//! Integrands here are decaying exponentials, often stiff near `t = 0` and
//! slow further out. The half-line `[0, horizon]` is cut into panels
//! `[0, w], [w, 2w], [2w, 4w], …`; each panel is refined by halving until two
//! successive Simpson sums differ by less than its share of the tolerance.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::{norm_fro, vec_norm, ComplexMatrix, ComplexVector};

pub const MAX_HALVINGS: usize = 24;

/// Values that can be accumulated by the integrator.
pub trait QuadValue: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
    fn qnorm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn qnorm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn qnorm(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for ComplexMatrix {
    fn zero_like(&self) -> Self {
        ComplexMatrix::zeros(self.dim())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_mut_with(x, |s, v| *s += v * a);
    }
    fn qnorm(&self) -> f64 {
        norm_fro(self)
    }
}

impl QuadValue for ComplexVector {
    fn zero_like(&self) -> Self {
        ComplexVector::zeros(self.len())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_mut_with(x, |s, v| *s += v * a);
    }
    fn qnorm(&self) -> f64 {
        vec_norm(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PanelPlan {
    pub horizon: f64,
    /// Rough rate scale of the integrand (largest exponent magnitude).
    pub stiffness: f64,
    /// Absolute tolerance on the halving change, summed over panels.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct QuadResult<V> {
    pub value: V,
    /// Sum of the final halving changes over all panels.
    pub est_error: f64,
    pub evaluations: usize,
}

/// Integrates over `[0, plan.horizon]`. `sample(start, step, count)` must
/// return the integrand at `start + k·step` for `k = 0..count`.
pub fn integrate<V, F>(mut sample: F, plan: PanelPlan) -> Result<QuadResult<V>>
where
    V: QuadValue,
    F: FnMut(f64, f64, usize) -> Vec<V>,
{
    let stiff = plan.stiffness.max(1e-3);
    let first = (1.0 / stiff).min(plan.horizon);
    let mut edges = vec![0.0, first];
    while *edges.last().unwrap() < plan.horizon {
        let next = (2.0 * edges.last().unwrap()).min(plan.horizon);
        edges.push(next);
    }
    let panels = edges.len() - 1;
    let panel_tol = plan.tol / panels as f64;

    let mut total: Option<V> = None;
    let mut est_error = 0.0;
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mut nsub = (2 * ((b - a) * stiff / 4.0).ceil() as usize).clamp(2, 256);
        let mut prev = simpson(&mut sample, a, b, nsub);
        evaluations += nsub + 1;
        let mut halvings = 0;
        let (value, change) = loop {
            nsub *= 2;
            halvings += 1;
            let cur = simpson(&mut sample, a, b, nsub);
            evaluations += nsub + 1;
            let mut diff = cur.clone();
            diff.axpy(-1.0, &prev);
            let change = diff.qnorm();
            if change <= panel_tol {
                let mut corrected = cur;
                corrected.axpy(1.0 / 15.0, &diff);
                break (corrected, change);
            }
            if halvings >= MAX_HALVINGS {
                return Err(Error::QuadratureDivergence(MAX_HALVINGS));
            }
            prev = cur;
        };
        est_error += change;
        match total.as_mut() {
            Some(t) => t.axpy(1.0, &value),
            None => total = Some(value),
        }
    }
    let value = total.ok_or_else(|| Error::InvalidGrid("empty integration range".into()))?;
    Ok(QuadResult { value, est_error, evaluations })
}

fn simpson<V, F>(sample: &mut F, a: f64, b: f64, nsub: usize) -> V
where
    V: QuadValue,
    F: FnMut(f64, f64, usize) -> Vec<V>,
{
    let h = (b - a) / nsub as f64;
    let vals = sample(a, h, nsub + 1);
    let mut acc = vals[0].zero_like();
    for (k, v) in vals.iter().enumerate() {
        let w = if k == 0 || k == nsub {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.axpy(w * h / 3.0, v);
    }
    acc
}

/// `∫_t^∞ u^k/k! e^{−r u} du` in closed form.
pub fn poly_exp_tail(k: u32, r: f64, t: f64) -> f64 {
    // e^{−rt} Σ_{j=0..k} t^{k−j} / ((k−j)! r^{j+1})
    let mut sum = 0.0;
    let mut fact = 1.0;
    for i in 0..=k {
        // i = k − j
        if i > 0 {
            fact *= i as f64;
        }
        let j = k - i;
        sum += t.powi(i as i32) / (fact * r.powi(j as i32 + 1));
    }
    (-r * t).exp() * sum
}

/// Smallest doubling horizon at which `scale · poly_exp_tail(k, r, t) ≤ tol`.
pub fn tail_horizon(k: u32, r: f64, scale: f64, tol: f64) -> f64 {
    let mut t = 1.0 / r.max(1e-300);
    t = t.min(1.0);
    while scale * poly_exp_tail(k, r, t) > tol && t < 1e7 {
        t *= 1.25;
    }
    t
}
