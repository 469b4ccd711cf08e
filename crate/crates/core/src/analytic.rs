//! Exact special solutions: the stationary profile, traveling pulses, the
//! implicit pulse-speed relation and the critical stiffness.
//!
//! All integrals run over `ξ ∈ [0, ∞)` against `ĝ`. When the kernel has a
//! closed-form Fourier cutoff the range is truncated where `ĝ < 1e-14`;
//! otherwise the half line is mapped onto `(0, 1]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::quad::{integrate, integrate_to_infinity, QuadOptions, QuadResult};

/// Truncation threshold on `ĝ` for the half-line integrals.
pub const FOURIER_TAIL_TOL: f64 = 1e-14;

/// Bisection tolerance on the pulse speed.
pub const SPEED_TOL: f64 = 1e-10;

const MAX_OSCILLATORY_PANELS: usize = 60_000;

fn half_line<F: Fn(f64) -> f64>(model: &Model, f: F, oscillation: f64, opts: QuadOptions) -> Result<QuadResult> {
    match model.kernel.fourier_cutoff(FOURIER_TAIL_TOL) {
        Some(cut) if cut <= 0.0 => Ok(QuadResult { value: 0.0, error: 0.0, panels: 0 }),
        Some(cut) => {
            let panels = ((cut * oscillation.abs() / PI).ceil() as usize + 16).min(MAX_OSCILLATORY_PANELS);
            integrate(f, 0.0, cut, opts.with_initial_panels(panels))
        }
        None => {
            let split = 1.0 / model.beta;
            let head = integrate(&f, 0.0, split, opts.with_initial_panels(16))?;
            let tail = integrate_to_infinity(&f, split, opts.with_initial_panels(64))?;
            Ok(QuadResult {
                value: head.value + tail.value,
                error: head.error + tail.error,
                panels: head.panels + tail.panels,
            })
        }
    }
}

fn smooth_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, ..QuadOptions::default() }
}

fn profile_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_panels: 400_000, ..QuadOptions::default() }
}

/// `|(1 + β²ξ²)² + α²v²ξ²|`, the squared modulus of the pulse symbol.
fn pulse_denominator(model: &Model, v: f64, xi: f64) -> f64 {
    let a = 1.0 + model.beta * model.beta * xi * xi;
    let b = model.alpha * v * xi;
    a * a + b * b
}

/// `∫₀^∞ ĝ(ξ) ξ² / ((1+β²ξ²)² + α²v²ξ²) dξ`.
pub fn velocity_integral(model: &Model, v: f64) -> Result<QuadResult> {
    let g = &model.kernel;
    half_line(model, |xi| g.fourier(xi) * xi * xi / pulse_denominator(model, v, xi), 0.0, smooth_opts())
}

/// `(η/π) α²γ ∫₀^∞ ĝ ξ² / ((1+β²ξ²)² + α²v²ξ²) dξ − 1`.
///
/// Strictly decreasing in `v ≥ 0`, tends to `−1` as `v → ∞`, and equals
/// `η/η* − 1` at `v = 0`.
pub fn velocity_residual(model: &Model, v: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::Domain { name: "v", value: v, constraint: "v >= 0" });
    }
    let i = velocity_integral(model, v)?;
    Ok(model.eta / PI * model.alpha * model.alpha * model.gamma * i.value - 1.0)
}

/// `A(β) = ∫₀^∞ ξ² / (1 + β²ξ²)² dξ`, by quadrature on the mapped half line.
pub fn a_integral(beta: f64) -> Result<f64> {
    crate::error::require_positive("beta", beta, "beta > 0")?;
    let f = |xi: f64| {
        let d = 1.0 + beta * beta * xi * xi;
        xi * xi / (d * d)
    };
    let split = 1.0 / beta;
    let head = integrate(f, 0.0, split, smooth_opts())?;
    let tail = integrate_to_infinity(f, split, smooth_opts())?;
    Ok(head.value + tail.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub eta_star: f64,
    /// Propagated from the quadrature error estimate.
    pub quadrature_error: f64,
}

/// `η* = π / (α²γ ∫₀^∞ ĝ ξ² / (1+β²ξ²)² dξ)`.
pub fn critical_stiffness(model: &Model) -> Result<ThresholdResult> {
    if model.gamma == 0.0 || model.kernel.is_zero() {
        return Err(Error::ZeroProduction);
    }
    let i = velocity_integral(model, 0.0)?;
    let scale = model.alpha * model.alpha * model.gamma;
    let eta_star = PI / (scale * i.value);
    Ok(ThresholdResult { eta_star, quadrature_error: eta_star * i.error / i.value })
}

/// Zero-width limit of the critical stiffness for a unit-mass source:
/// `4β³ / (α²γ)`.
pub fn critical_stiffness_zero_width(alpha: f64, beta: f64, gamma: f64) -> f64 {
    4.0 * beta.powi(3) / (alpha * alpha * gamma)
}

/// Richardson extrapolation of a quantity `f(ε)` with leading error linear
/// in `ε`, from `f(ε)` and `f(ε/ratio)`.
pub fn extrapolate_zero_width<F>(f: F, epsilon: f64, ratio: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let coarse = f(epsilon)?;
    let fine = f(epsilon / ratio)?;
    Ok((ratio * fine - coarse) / (ratio - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

/// `w ↦ S̄(w)` for the co-moving profile at speed `v` (reduces to the
/// stationary profile at `v = 0`).
#[derive(Debug, Clone)]
pub struct PulseProfile {
    pub model: Model,
    pub v: f64,
}

impl PulseProfile {
    /// Fourier transform `αγ ĝ (1 + β²ξ² + iαvξ) / ((1+β²ξ²)² + α²v²ξ²)`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let m = &self.model;
        let d = pulse_denominator(m, self.v, xi);
        let c = m.alpha * m.gamma * m.kernel.fourier(xi) / d;
        Complex64::new(c * (1.0 + m.beta * m.beta * xi * xi), c * m.alpha * self.v * xi)
    }

    /// `(αγ/π) ∫₀^∞ ĝ ((1+β²ξ²) cos wξ − αvξ sin wξ) / D dξ`.
    pub fn value(&self, w: f64) -> Result<f64> {
        let m = &self.model;
        let f = |xi: f64| {
            let a = 1.0 + m.beta * m.beta * xi * xi;
            let (s, c) = (w * xi).sin_cos();
            m.kernel.fourier(xi) * (a * c - m.alpha * self.v * xi * s) / pulse_denominator(m, self.v, xi)
        };
        let r = half_line(m, f, w, profile_opts())?;
        Ok(m.alpha * m.gamma / PI * r.value)
    }

    pub fn derivative(&self, w: f64) -> Result<f64> {
        let m = &self.model;
        let f = |xi: f64| {
            let a = 1.0 + m.beta * m.beta * xi * xi;
            let (s, c) = (w * xi).sin_cos();
            -m.kernel.fourier(xi) * xi * (a * s + m.alpha * self.v * xi * c) / pulse_denominator(m, self.v, xi)
        };
        let r = half_line(m, f, w, profile_opts())?;
        Ok(m.alpha * m.gamma / PI * r.value)
    }
}

pub fn pulse_profile(model: &Model, v: f64) -> PulseProfile {
    PulseProfile { model: model.clone(), v }
}

/// The even profile solving `(1 − β²∂²) S̄₀ = αγ g`, centered at `center`.
#[derive(Debug, Clone)]
pub struct StationaryProfile {
    pub profile: PulseProfile,
    pub center: f64,
}

impl StationaryProfile {
    pub fn value(&self, x: f64) -> Result<f64> {
        self.profile.value(x - self.center)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.profile.derivative(x - self.center)
    }

    pub fn fourier(&self, xi: f64) -> f64 {
        self.profile.fourier(xi).re
    }
}

pub fn stationary_profile(model: &Model, center: f64) -> StationaryProfile {
    StationaryProfile { profile: pulse_profile(model, 0.0), center }
}

#[derive(Debug, Clone)]
pub struct PulseSolution {
    /// Signed speed: positive for right-moving pulses.
    pub v_c: f64,
    pub direction: Direction,
    pub profile: PulseProfile,
    pub eta_star: f64,
}

impl PulseSolution {
    /// Co-moving profile `S̄(w)`, `w = x − x_c(t)`.
    pub fn value(&self, w: f64) -> Result<f64> {
        match self.direction {
            Direction::Right => self.profile.value(w),
            Direction::Left => self.profile.value(-w),
        }
    }

    pub fn derivative(&self, w: f64) -> Result<f64> {
        match self.direction {
            Direction::Right => self.profile.derivative(w),
            Direction::Left => self.profile.derivative(-w).map(|d| -d),
        }
    }

    /// Mirror image `x ↦ −x`.
    pub fn reflected(&self) -> Self {
        let direction = match self.direction {
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        };
        Self { v_c: -self.v_c, direction, ..self.clone() }
    }

    /// `|−η S̄′(0) − v_c|`.
    pub fn self_consistency_gap(&self) -> Result<f64> {
        Ok((-self.profile.model.eta * self.derivative(0.0)? - self.v_c).abs())
    }
}

#[derive(Debug, Clone)]
pub enum PulseOutcome {
    Pulse(PulseSolution),
    /// `η ≤ η*`: only the stationary state exists.
    BelowThreshold { eta_star: f64 },
}

impl PulseOutcome {
    pub fn speed(&self) -> f64 {
        match self {
            PulseOutcome::Pulse(p) => p.v_c,
            PulseOutcome::BelowThreshold { .. } => 0.0,
        }
    }

    pub fn is_below_threshold(&self) -> bool {
        matches!(self, PulseOutcome::BelowThreshold { .. })
    }
}

/// Bisection for the root of a residual that is positive at `lo`, negative
/// somewhere above it, and monotone decreasing.
pub(crate) fn bisect_decreasing<F>(f: F, lo: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut a = lo;
    let mut b = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    let mut fb = f(b)?;
    let mut doublings = 0;
    while fb >= 0.0 {
        a = b;
        b *= 2.0;
        fb = f(b)?;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Bracketing(format!(
                "residual still non-negative ({fb:.3e}) at v = {b:.3e}"
            )));
        }
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if f(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// The right-moving pulse, if `η > η*`.
pub fn pulse_velocity(model: &Model) -> Result<PulseOutcome> {
    let threshold = critical_stiffness(model)?;
    let r0 = velocity_residual(model, 0.0)?;
    if model.eta <= threshold.eta_star || r0 <= 0.0 {
        return Ok(PulseOutcome::BelowThreshold { eta_star: threshold.eta_star });
    }
    let v = bisect_decreasing(|v| velocity_residual(model, v), 0.0, SPEED_TOL)?;
    Ok(PulseOutcome::Pulse(PulseSolution {
        v_c: v,
        direction: Direction::Right,
        profile: pulse_profile(model, v),
        eta_star: threshold.eta_star,
    }))
}
