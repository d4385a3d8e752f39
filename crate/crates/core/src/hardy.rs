//! Sampled half-line signals and the Toeplitz operators `M_g` acting on them.
//!
//! `M_g f(t) = ∫₀^∞ h(−u) f(t + u) du` is anticausal: the output at `t` only
//! looks at the input after `t`. On a grid this becomes a correlation with
//! discrete taps `K_j ≈ h(−j dt)·dt`, applied by a zero-padded FFT of length
//! `2n` and restricted back to `[0, T_h)`.

use std::io::Write;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numkernel::{ComplexVector, ZERO};
use crate::symbols::{kernel, KernelMode, KernelRep, SymbolExpr};

/// Relative size of the last quarter of a signal above which the finite
/// window would visibly truncate `M_g f`.
pub const WRAPAROUND_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    dt: f64,
}

impl GridSpec {
    pub fn new(n_samples: usize, dt: f64) -> Result<Self> {
        if n_samples < 8 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples = {n_samples} must be a power of two ≥ 8"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        Ok(Self { n: n_samples, dt })
    }

    /// `n = 4096`, `dt = 2⁻⁸`.
    pub fn reference() -> Self {
        Self { n: 4096, dt: 1.0 / 256.0 }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same horizon, half the step.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, dt: self.dt / 2.0 }
    }
}

/// `values[[k, i]] ≈ f_i(k·dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: GridSpec,
    values: Array2<Complex64>,
}

impl SampledSignal {
    pub fn new(grid: GridSpec, values: Array2<Complex64>) -> Result<Self> {
        if values.nrows() != grid.n {
            return Err(Error::DimensionMismatch(format!(
                "signal has {} samples, grid has {}",
                values.nrows(),
                grid.n
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidGrid("signal has non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        Self { grid, values: Array2::zeros((grid.n, dim)) }
    }

    pub fn from_fn(grid: GridSpec, dim: usize, f: impl Fn(f64) -> ComplexVector) -> Result<Self> {
        let mut values = Array2::zeros((grid.n, dim));
        for (k, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
            let v = f(grid.time(k));
            if v.len() != dim {
                return Err(Error::DimensionMismatch("sample dimension changed".into()));
            }
            row.assign(&v);
        }
        Self::new(grid, values)
    }

    pub fn from_scalar_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::from_fn(grid, 1, |t| ComplexVector::from_elem(1, f(t)))
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn sample(&self, k: usize) -> ComplexVector {
        self.values.row(k).to_owned()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { grid: self.grid, values: self.values.mapv(|z| z * k) }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch("signals live on different grids".into()));
        }
        Ok(Self { grid: self.grid, values: &self.values - &other.values })
    }

    /// `max_k ‖f(t_k)‖` over the last quarter divided by the overall maximum.
    pub fn tail_ratio(&self) -> f64 {
        let norms: Vec<f64> = self
            .values
            .axis_iter(Axis(0))
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let peak = norms.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let tail = norms[3 * self.grid.n / 4..].iter().copied().fold(0.0, f64::max);
        tail / peak
    }

    /// Plot-ready CSV: `t, re_0, im_0, re_1, im_1, …`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for i in 0..self.dim() {
            header.push(format!("re_{i}"));
            header.push(format!("im_{i}"));
        }
        w.write_record(&header).map_err(io)?;
        for (k, row) in self.values.axis_iter(Axis(0)).enumerate() {
            let mut rec = vec![self.grid.time(k).to_string()];
            for z in row {
                rec.push(z.re.to_string());
                rec.push(z.im.to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

/// `sqrt(dt · Σ_k ‖f(t_k)‖²)`.
pub fn l2_norm(f: &SampledSignal) -> f64 {
    (f.grid.dt * f.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// Keeps the non-negative-time half of a signal sampled on `[−T_h, T_h)`.
/// `full` has `2n` rows; row `n` is `t = 0`.
pub fn project_causal(full: &Array2<Complex64>, grid: GridSpec) -> Result<SampledSignal> {
    if full.nrows() != 2 * grid.n {
        return Err(Error::DimensionMismatch(format!(
            "two-sided signal needs {} samples, got {}",
            2 * grid.n,
            full.nrows()
        )));
    }
    SampledSignal::new(grid, full.slice(ndarray::s![grid.n.., ..]).to_owned())
}

fn grid_index(tau: f64, dt: f64) -> Option<usize> {
    let m = tau / dt;
    let r = m.round();
    if tau >= 0.0 && (m - r).abs() <= 1e-9 * r.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// `(σ_τ f)(t) = f(t + τ)`, zero past the end of the window.
pub fn shift(f: &SampledSignal, tau: f64) -> Result<SampledSignal> {
    let m = grid_index(tau, f.grid.dt).ok_or(Error::OffGridShift(tau))?;
    let n = f.grid.n;
    let mut values = Array2::zeros(f.values.dim());
    if m < n {
        values.slice_mut(ndarray::s![..n - m, ..]).assign(&f.values.slice(ndarray::s![m.., ..]));
    }
    Ok(SampledSignal { grid: f.grid, values })
}

/// Points in the interpolation stencil for off-grid positions.
const STENCIL: usize = 6;

/// Interpolation weights for fractional tap position `pos`: the grid index
/// itself when `pos` is integral, otherwise Lagrange weights on the
/// [`STENCIL`] nodes centred on `pos` (shifted right near the first tap).
fn stencil(pos: f64) -> Vec<(usize, f64)> {
    let nearest = pos.round();
    if (pos - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        return vec![(nearest as usize, 1.0)];
    }
    let first = (pos.floor() as usize).saturating_sub(STENCIL / 2 - 1);
    let nodes: Vec<usize> = (first..first + STENCIL).collect();
    nodes
        .iter()
        .map(|&j| {
            let w = nodes
                .iter()
                .filter(|&&m| m != j)
                .map(|&m| (pos - m as f64) / (j as f64 - m as f64))
                .product();
            (j, w)
        })
        .collect()
}

fn add_point(taps: &mut [Complex64], pos: f64, weight: Complex64) {
    for (k, w) in stencil(pos) {
        if k < taps.len() {
            taps[k] += weight * w;
        }
    }
}

/// Taps of one mode starting at integer offset `m0`: trapezoid weights plus
/// the first Euler–Maclaurin endpoint correction, with the signal's slope at
/// the start taken from a one-sided second-order difference.
fn add_mode_at(taps: &mut [Complex64], mode: &KernelMode, m0: usize, dt: f64, weight: f64) {
    let n = taps.len();
    if m0 >= n {
        return;
    }
    let p = mode.power;
    let fact: f64 = (1..p).map(|k| k as f64).product();
    let coef = mode.c * weight;
    let phi = |u: f64| -> Complex64 {
        coef * (-(mode.alpha) * u).exp() * (u.powi(p as i32 - 1) / fact)
    };
    for m in 0..n - m0 {
        let w = if m == 0 { 0.5 * dt } else { dt };
        taps[m0 + m] += phi(m as f64 * dt) * w;
    }
    let phi0 = if p == 1 { coef } else { ZERO };
    let dphi0 = match p {
        1 => -mode.alpha * coef,
        2 => coef,
        _ => ZERO,
    };
    taps[m0] += dphi0 * (dt * dt / 12.0);
    let k = dt / 24.0;
    for (off, w) in [(0usize, -3.0), (1, 4.0), (2, -1.0)] {
        if m0 + off < n {
            taps[m0 + off] += phi0 * (k * w);
        }
    }
}

/// Discrete correlation taps `K_0..K_{n−1}` for `M_g` on `grid`.
pub fn discrete_taps(k: &KernelRep, grid: GridSpec) -> Vec<Complex64> {
    let (n, dt) = (grid.n, grid.dt);
    let mut taps = vec![ZERO; n];
    taps[0] += k.constant;
    for d in &k.delays {
        add_point(&mut taps, d.tau / dt, d.weight);
    }
    for mode in &k.modes {
        // A shifted mode is σ_shift applied after the unshifted one.
        for (m0, w) in stencil(mode.shift / dt) {
            add_mode_at(&mut taps, mode, m0, dt, w);
        }
    }
    taps
}

/// Applies precomputed taps to every component of `f`.
pub fn correlate(taps: &[Complex64], f: &SampledSignal) -> SampledSignal {
    let n = f.grid.n;
    let len = 2 * n;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut kb = vec![ZERO; len];
    for (j, &t) in taps.iter().enumerate() {
        kb[(len - j) % len] = t;
    }
    fwd.process(&mut kb);

    let scale = 1.0 / len as f64;
    let mut out = Array2::zeros((n, f.dim()));
    for (i, col) in f.values.axis_iter(Axis(1)).enumerate() {
        let mut buf = vec![ZERO; len];
        for (k, z) in col.iter().enumerate() {
            buf[k] = *z;
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kb) {
            *b *= k;
        }
        inv.process(&mut buf);
        for k in 0..n {
            out[[k, i]] = buf[k] * scale;
        }
    }
    SampledSignal { grid: f.grid, values: out }
}

/// `M_g f`. Rejects inputs that have not decayed by the last quarter of the
/// window.
pub fn toeplitz_apply(g: &SymbolExpr, f: &SampledSignal) -> Result<SampledSignal> {
    let ratio = f.tail_ratio();
    if ratio > WRAPAROUND_GUARD {
        return Err(Error::Wraparound(ratio));
    }
    let k = kernel(g)?;
    Ok(correlate(&discrete_taps(&k, f.grid), f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::c;
    use crate::symbols::parse_symbol;

    fn decaying(grid: GridSpec) -> SampledSignal {
        SampledSignal::from_scalar_fn(grid, |t| c((-3.0 * t).exp() * (5.0 * t).cos(), 0.0)).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(7, 0.1).is_err());
        assert!(GridSpec::new(12, 0.1).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
        let g = GridSpec::new(16, 0.5).unwrap();
        assert_eq!(g.horizon(), 8.0);
    }

    #[test]
    fn identity_symbol() {
        let f = decaying(GridSpec::reference());
        let out = toeplitz_apply(&SymbolExpr::constant(1.0), &f).unwrap();
        assert!(l2_norm(&out.sub(&f).unwrap()) < 1e-12);
    }

    #[test]
    fn delay_matches_shift() {
        let grid = GridSpec::reference();
        let f = decaying(grid);
        let tau = 37.0 * grid.dt();
        let out = toeplitz_apply(&SymbolExpr::delay(tau), &f).unwrap();
        let sh = shift(&f, tau).unwrap();
        assert!(l2_norm(&out.sub(&sh).unwrap()) < 1e-12);
    }

    #[test]
    fn resolvent_atom_closed_form() {
        // M_g e^{−t} at t = 1 for g = 1/(2−s): ∫₀^∞ e^{−2u} e^{−(1+u)} du = e^{−1}/3.
        let grid = GridSpec::new(16384, 1.0 / 256.0).unwrap();
        let f = SampledSignal::from_scalar_fn(grid, |t| c((-t).exp(), 0.0)).unwrap();
        let out = toeplitz_apply(&parse_symbol("1/(2-s)").unwrap(), &f).unwrap();
        let v = out.values()[[256, 0]];
        assert!((v - c((-1f64).exp() / 3.0, 0.0)).norm() < 1e-9, "{v}");
    }

    #[test]
    fn off_grid_delay() {
        let grid = GridSpec::reference();
        let f = decaying(grid);
        let out = toeplitz_apply(&SymbolExpr::delay(0.3), &f).unwrap();
        let exact = SampledSignal::from_scalar_fn(grid, |t| {
            let u = t + 0.3;
            c((-3.0 * u).exp() * (5.0 * u).cos(), 0.0)
        })
        .unwrap();
        // Compare away from the window end, where f(t + 0.3) is truncated.
        let k = grid.n_samples() - 128;
        let diff = (0..k).map(|i| (out.values()[[i, 0]] - exact.values()[[i, 0]]).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff:e}");
        // One-sided stencil below the first tap.
        let out = toeplitz_apply(&SymbolExpr::delay(0.4 * grid.dt()), &f).unwrap();
        let v = out.values()[[0, 0]];
        let u = 0.4 * grid.dt();
        let err = (v.re - (-3.0 * u).exp() * (5.0 * u).cos()).abs();
        assert!(err < 1e-9, "{err:e}");
    }

    #[test]
    fn guard_rejects_slow_signals() {
        let grid = GridSpec::new(64, 0.1).unwrap();
        let f = SampledSignal::from_scalar_fn(grid, |t| c((-0.1 * t).exp(), 0.0)).unwrap();
        assert!(matches!(toeplitz_apply(&SymbolExpr::constant(1.0), &f), Err(Error::Wraparound(_))));
    }

    #[test]
    fn projection_examples() {
        let grid = GridSpec::new(8, 0.25).unwrap();
        let causal = Array2::from_shape_fn((16, 1), |(k, _)| if k >= 8 { c(k as f64, 0.0) } else { ZERO });
        let p = project_causal(&causal, grid).unwrap();
        assert_eq!(p.values()[[0, 0]], c(8.0, 0.0));
        let anti = Array2::from_shape_fn((16, 1), |(k, _)| if k < 8 { c(1.0, 0.0) } else { ZERO });
        assert_eq!(l2_norm(&project_causal(&anti, grid).unwrap()), 0.0);
        let mut twice = Array2::zeros((16, 1));
        twice.slice_mut(ndarray::s![8.., ..]).assign(p.values());
        assert_eq!(project_causal(&twice, grid).unwrap(), p);
    }

    #[test]
    fn shift_examples() {
        let grid = GridSpec::new(16, 0.5).unwrap();
        let mut v = Array2::zeros((16, 1));
        v[[5, 0]] = c(1.0, 0.0);
        let f = SampledSignal::new(grid, v).unwrap();
        assert_eq!(shift(&f, 0.0).unwrap(), f);
        let s = shift(&f, 0.5).unwrap();
        assert_eq!(s.values()[[4, 0]], c(1.0, 0.0));
        assert!(l2_norm(&s) <= l2_norm(&f));
        assert!(matches!(shift(&f, 0.3), Err(Error::OffGridShift(_))));
    }

    #[test]
    fn l2_examples() {
        let grid = GridSpec::new(16, 0.25).unwrap();
        assert_eq!(l2_norm(&SampledSignal::zeros(grid, 2)), 0.0);
        let mut v = Array2::zeros((16, 1));
        v[[3, 0]] = c(1.0, 0.0);
        assert!((l2_norm(&SampledSignal::new(grid, v).unwrap()) - 0.5).abs() < 1e-15);
        let fine = GridSpec::new(1 << 18, 1e-4).unwrap();
        let e = SampledSignal::from_scalar_fn(fine, |t| c((-t).exp(), 0.0)).unwrap();
        assert!((l2_norm(&e) - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn csv_export() {
        let grid = GridSpec::new(8, 0.5).unwrap();
        let f = SampledSignal::from_fn(grid, 2, |t| ndarray::arr1(&[c(t, 0.0), c(0.0, -t)])).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,re_0,im_0,re_1,im_1");
        assert_eq!(lines[2], "0.5,0.5,0,0,-0.5");
        assert_eq!(lines.len(), 9);
    }
}
