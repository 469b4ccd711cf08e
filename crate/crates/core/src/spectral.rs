//! Periodic truncation of the line: the grid `x_n = −L + n·dx`, `dx = 2L/N`,
//! and fields stored through their half spectrum.
//!
//! Coefficients approximate the continuous transform,
//! `ŝ_j ≈ ∫_{−L}^{L} s(x) e^{−iξ_j x} dx` with `ξ_j = πj/L`, `j = 0..=N/2`,
//! so that `ŝ_0` is the total integral and the inverse is
//! `s(x) = (1/2L)[ŝ_0 + 2 Σ_j Re(ŝ_j e^{iξ_j x})]`. The Nyquist coefficient
//! is kept so that samples round-trip exactly, but it carries no derivative.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct SpectralGrid {
    half_width: f64,
    n_points: usize,
    dx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("half_width", &self.half_width)
            .field("n_points", &self.n_points)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.n_points == other.n_points
    }
}

impl SpectralGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        crate::error::require_positive("half_width", half_width, "half_width > 0")?;
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Grid(format!("n_points = {n_points} must be a power of two >= 8")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            half_width,
            n_points,
            dx: 2.0 * half_width / n_points as f64,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Number of stored coefficients, `N/2 + 1`.
    pub fn n_modes(&self) -> usize {
        self.n_points / 2 + 1
    }

    pub fn nyquist(&self) -> usize {
        self.n_points / 2
    }

    pub fn x(&self, n: usize) -> f64 {
        -self.half_width + self.dx * n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|n| self.x(n)).collect()
    }

    pub fn xi(&self, j: usize) -> f64 {
        PI * j as f64 / self.half_width
    }

    /// Upper edge of the last mode carrying derivatives,
    /// `(N/2 − ½)·π/L`.
    pub fn resolved_cutoff(&self) -> f64 {
        (self.nyquist() as f64 - 0.5) * PI / self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= -self.half_width && x <= self.half_width
    }

    /// Half spectrum of real samples.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.n_points, "sample count must match the grid");
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.truncate(self.n_modes());
        for (j, c) in buf.iter_mut().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *c *= sign * self.dx;
        }
        buf[0].im = 0.0;
        let ny = self.nyquist();
        buf[ny].im = 0.0;
        buf
    }

    /// Samples from a half spectrum.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_modes(), "coefficient count must match the grid");
        let n = self.n_points;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (j, &c) in coeffs.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let v = c * (sign / self.dx);
            if j == 0 || j == self.nyquist() {
                buf[j] = Complex64::new(v.re, 0.0);
            } else {
                buf[j] = v;
                buf[n - j] = v.conj();
            }
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }

    /// Samples of `∂ₓᵐ s`.
    pub fn derivative_samples(&self, coeffs: &[Complex64], m: usize) -> Vec<f64> {
        if m == 0 {
            return self.inverse(coeffs);
        }
        let ny = self.nyquist();
        let d: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if j == ny {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, self.xi(j)).powu(m as u32)
                }
            })
            .collect();
        self.inverse(&d)
    }

    /// `max_n |∂ₓᵐ s(x_n)|` for `m = 0..=k`.
    pub fn wkinf_norms(&self, coeffs: &[Complex64], k: usize) -> Vec<f64> {
        (0..=k)
            .map(|m| self.derivative_samples(coeffs, m).iter().fold(0.0, |a: f64, v| a.max(v.abs())))
            .collect()
    }

    /// `s(x)` by direct summation of the trigonometric interpolant.
    pub fn eval(&self, coeffs: &[Complex64], x: f64) -> f64 {
        let step = Complex64::from_polar(1.0, PI * x / self.half_width);
        let mut phase = step;
        let mut sum = 0.0;
        for c in &coeffs[1..self.nyquist()] {
            sum += (c * phase).re;
            phase *= step;
        }
        let ny = self.nyquist();
        let tail = coeffs[ny].re * (self.xi(ny) * x).cos();
        (coeffs[0].re + 2.0 * sum + tail) / (2.0 * self.half_width)
    }

    /// `∂ₓs(x)` by direct summation, `−(1/L) Σ ξ_j Im(ŝ_j e^{iξ_j x})`.
    pub fn eval_derivative(&self, coeffs: &[Complex64], x: f64) -> f64 {
        let step = Complex64::from_polar(1.0, PI * x / self.half_width);
        let mut phase = step;
        let mut sum = 0.0;
        for (j, c) in coeffs[1..self.nyquist()].iter().enumerate() {
            sum += (j + 1) as f64 * (c * phase).im;
            phase *= step;
        }
        -sum * PI / (self.half_width * self.half_width)
    }

    /// Coefficients of `s(· − m·dx)`.
    pub fn shift_cells(&self, coeffs: &mut [Complex64], m: i64) {
        let ny = self.nyquist();
        let nyquist = coeffs[ny].re;
        let step = Complex64::from_polar(1.0, -PI * (m as f64) * self.dx / self.half_width);
        let mut phase = Complex64::new(1.0, 0.0);
        for c in coeffs.iter_mut() {
            *c *= phase;
            phase *= step;
        }
        // e^{−iπm} is exactly ±1
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        coeffs[ny] = Complex64::new(sign * nyquist, 0.0);
    }
}

/// Barycentric weights `(−1)^k C(p, k)` for `p + 1` equispaced nodes.
fn equispaced_weights(p: usize) -> Vec<f64> {
    let mut w = vec![1.0; p + 1];
    for k in 1..=p {
        w[k] = -w[k - 1] * (p - k + 1) as f64 / k as f64;
    }
    w
}

/// Interpolates periodic grid samples at `x` with the degree-`order`
/// polynomial through the `order + 1` nearest nodes (barycentric form).
pub fn barycentric_eval(grid: &SpectralGrid, samples: &[f64], x: f64, order: usize) -> f64 {
    let n = grid.n_points() as i64;
    let p = order.max(1);
    let u = (x + grid.half_width()) / grid.dx();
    let first = (u - p as f64 / 2.0).round() as i64;
    let w = equispaced_weights(p);
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let idx = first + k as i64;
        let xk = grid.x(0) + grid.dx() * idx as f64;
        let fk = samples[idx.rem_euclid(n) as usize];
        let d = x - xk;
        if d == 0.0 {
            return fk;
        }
        num += wk * fk / d;
        den += wk / d;
    }
    num / den
}

/// A real field on a [`SpectralGrid`], stored as its half spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Arc<SpectralGrid>,
    pub coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Arc<SpectralGrid>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); grid.n_modes()];
        Self { grid, coeffs }
    }

    pub fn from_samples(grid: Arc<SpectralGrid>, samples: &[f64]) -> Self {
        let coeffs = grid.forward(samples);
        Self { grid, coeffs }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<SpectralGrid>, f: F) -> Self {
        let samples: Vec<f64> = grid.points().into_iter().map(f).collect();
        Self::from_samples(grid, &samples)
    }

    pub fn from_coeffs(grid: Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::Grid(format!("expected {} coefficients, got {}", grid.n_modes(), coeffs.len())));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn samples(&self) -> Vec<f64> {
        self.grid.inverse(&self.coeffs)
    }

    /// `∫ s dx`.
    pub fn total(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.grid.eval(&self.coeffs, x))
    }

    /// `∂ₓs(x)` by direct spectral summation.
    pub fn gradient_at(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.grid.eval_derivative(&self.coeffs, x))
    }

    /// `∂ₓs(x)` by barycentric interpolation of spectral derivative samples.
    pub fn gradient_barycentric(&self, x: f64, order: usize) -> Result<f64> {
        self.check_domain(x)?;
        let d = self.grid.derivative_samples(&self.coeffs, 1);
        Ok(barycentric_eval(&self.grid, &d, x, order))
    }

    pub fn wkinf_norms(&self, k: usize) -> Vec<f64> {
        self.grid.wkinf_norms(&self.coeffs, k)
    }

    /// `s(· − m·dx)`.
    pub fn shifted_cells(&self, m: i64) -> Self {
        let mut out = self.clone();
        out.grid.shift_cells(&mut out.coeffs, m);
        out
    }

    /// `x ↦ s(−x)`; maps the grid onto itself.
    pub fn reflected(&self) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn sub(&self, other: &Field) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn add(&self, other: &Field) -> Self {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// `max |s|` over `|x| ≥ 0.9 L`, the domain-truncation monitor.
    pub fn boundary_max(&self) -> f64 {
        let l = self.grid.half_width();
        self.grid
            .points()
            .into_iter()
            .zip(self.samples())
            .filter(|(x, _)| x.abs() >= 0.9 * l)
            .fold(0.0, |m: f64, (_, s)| m.max(s.abs()))
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.grid.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x, half_width: self.grid.half_width() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(l: f64, n: usize) -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new(l, n).unwrap())
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpectralGrid::new(10.0, 100).is_err());
        assert!(SpectralGrid::new(-1.0, 64).is_err());
    }

    #[test]
    fn coefficients_approximate_the_transform() {
        let g = grid(20.0, 256);
        let f = Field::from_fn(g.clone(), |x| (-x * x).exp());
        assert!((f.total() - PI.sqrt()).abs() < 1e-12);
        let xi = g.xi(5);
        let exact = PI.sqrt() * (-xi * xi / 4.0).exp();
        assert!((f.coeffs[5].re - exact).abs() < 1e-12);
        assert!(f.coeffs[5].im.abs() < 1e-12);
    }

    #[test]
    fn direct_sums_match_samples() {
        let g = grid(10.0, 128);
        let f = Field::from_fn(g.clone(), |x| (-(x - 0.7).powi(2)).exp() + 0.3 * (-(x + 2.0).powi(2)).exp());
        let samples = f.samples();
        let d = g.derivative_samples(&f.coeffs, 1);
        for n in [3, 40, 64, 100] {
            assert!((g.eval(&f.coeffs, g.x(n)) - samples[n]).abs() < 1e-13);
            assert!((g.eval_derivative(&f.coeffs, g.x(n)) - d[n]).abs() < 1e-12);
        }
        let x = 0.123;
        let exact = -2.0 * (x - 0.7) * (-(x - 0.7f64).powi(2)).exp() - 0.6 * (x + 2.0) * (-(x + 2.0f64).powi(2)).exp();
        assert!((f.gradient_at(x).unwrap() - exact).abs() < 1e-10);
        assert!(f.gradient_at(10.5).is_err());
    }

    #[test]
    fn cell_shift_rotates_samples() {
        let g = grid(8.0, 64);
        let f = Field::from_fn(g.clone(), |x| (-(x - 0.4).powi(2)).exp() * (1.0 + 0.1 * x));
        let s0 = f.samples();
        for m in [1i64, -3, 7] {
            let s1 = f.shifted_cells(m).samples();
            for n in 0..64 {
                let src = (n as i64 - m).rem_euclid(64) as usize;
                assert!((s1[n] - s0[src]).abs() < 1e-13, "m={m} n={n}");
            }
        }
        assert_eq!(f.shifted_cells(0).samples(), s0);
    }

    #[test]
    fn reflection_maps_grid_onto_itself() {
        let g = grid(8.0, 64);
        let f = Field::from_fn(g.clone(), |x| (-(x - 1.1).powi(2)).exp());
        let r = f.reflected().samples();
        let s = f.samples();
        for n in 0..64 {
            assert!((r[n] - s[(64 - n) % 64]).abs() < 1e-14);
        }
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let g = grid(4.0, 64);
        let samples: Vec<f64> = g.points().iter().map(|x| 2.0 * x - 0.5).collect();
        for x in [-0.37, 0.0, 0.051, 1.3] {
            assert!((barycentric_eval(&g, &samples, x, 6) - (2.0 * x - 0.5)).abs() < 1e-10);
        }
        let cubic: Vec<f64> = g.points().iter().map(|x| x * x * x - x).collect();
        let x = 0.77f64;
        assert!((barycentric_eval(&g, &cubic, x, 6) - (x * x * x - x)).abs() < 1e-10);
    }

    #[test]
    fn barycentric_gradient_of_smooth_field() {
        let g = grid(10.0, 256);
        let f = Field::from_fn(g, |x| (-(x * x)).exp());
        let x = 0.3141f64;
        let exact = -2.0 * x * (-(x * x)).exp();
        assert!((f.gradient_barycentric(x, 6).unwrap() - exact).abs() < 1e-7);
    }

    #[test]
    fn norms_of_zero_field() {
        let f = Field::zeros(grid(5.0, 32));
        assert_eq!(f.wkinf_norms(2), vec![0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(-5.0f64..5.0, 64)) {
            let g = grid(3.0, 64);
            let f = Field::from_samples(g, &values);
            let back = f.samples();
            let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }
}
