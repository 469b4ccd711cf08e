//! Slow, independent checks for the fast paths.
//!
//! Everything here uses trapezoid sums with Richardson (Romberg)
//! extrapolation in direct space, never the Gauss–Kronrod panels of
//! [`crate::quad`] or the spectral machinery, so that agreement is evidence
//! rather than a tautology.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::analytic;
use crate::error::{Error, Result};
use crate::kernel::{hermite, SourceKernel};
use crate::model::{Model, ModelParams};

const MAX_LEVELS: usize = 22;

/// Romberg integration of `f` over `[a, b]`.
pub fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let h0 = b - a;
    let mut prev = vec![0.5 * h0 * (f(a) + f(b))];
    let mut n = 1usize;
    for level in 1..MAX_LEVELS {
        let h = h0 / (2 * n) as f64;
        let mid: f64 = (0..n).map(|i| f(a + h * (2 * i + 1) as f64)).sum();
        let mut row = Vec::with_capacity(level + 1);
        row.push(0.5 * prev[0] + h * mid);
        let mut pow4 = 1.0;
        for k in 1..=level {
            pow4 *= 4.0;
            row.push(row[k - 1] + (row[k - 1] - prev[k - 1]) / (pow4 - 1.0));
        }
        let err = (row[level] - prev[level - 1]).abs();
        if level >= 4 && err <= tol.max(1e-15 * row[level].abs()) {
            return Ok(row[level]);
        }
        prev = row;
        n *= 2;
    }
    let value = prev[prev.len() - 1];
    Err(Error::Quadrature { value, error: f64::NAN, tol })
}

/// Romberg on each of `pieces` equal sub-intervals; for integrands that
/// oscillate or have kinks at known points.
pub fn romberg_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> Result<f64> {
    let pieces = pieces.max(1);
    let w = (b - a) / pieces as f64;
    let mut total = 0.0;
    for i in 0..pieces {
        let lo = a + w * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + w };
        total += romberg(&f, lo, hi, tol / pieces as f64)?;
    }
    Ok(total)
}

/// `∫_{-R}^{R} f(x) e^{-ixξ} dx` as `(re, im)`, with the interval split at
/// the origin so that profiles with a kink there are handled.
pub fn fourier_by_quadrature<F: Fn(f64) -> f64>(f: F, xi: f64, radius: f64) -> Result<(f64, f64)> {
    let pieces = ((xi.abs() * radius / PI).ceil() as usize).max(8);
    let tol = 1e-13;
    let re = romberg_pieces(|x| f(x) * (xi * x).cos(), -radius, 0.0, pieces, tol)?
        + romberg_pieces(|x| f(x) * (xi * x).cos(), 0.0, radius, pieces, tol)?;
    let im = -romberg_pieces(|x| f(x) * (xi * x).sin(), -radius, 0.0, pieces, tol)?
        - romberg_pieces(|x| f(x) * (xi * x).sin(), 0.0, radius, pieces, tol)?;
    Ok((re, im))
}

/// Transform of the source kernel in direct space.
pub fn kernel_fourier_by_quadrature(kernel: &SourceKernel, xi: f64) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let r = kernel.support_radius(1e-17);
    fourier_by_quadrature(|z| kernel.profile(z), xi, r).map(|(re, _)| re)
}

/// `(αγ/2β) ∫ e^{-|x-y|/β} g(y) dy`, the stationary profile as a direct-space
/// convolution with the Green's function of `1 − β²∂²`.
pub fn greens_convolution(model: &Model, x: f64) -> Result<f64> {
    if model.kernel.is_zero() || model.gamma == 0.0 {
        return Ok(0.0);
    }
    let r = model.kernel.support_radius(1e-17);
    let beta = model.beta;
    let f = |y: f64| (-(x - y).abs() / beta).exp() * model.kernel.profile(y);
    let tol = 1e-14;
    let pieces = 16;
    let integral = if x <= -r || x >= r {
        romberg_pieces(f, -r, r, pieces, tol)?
    } else {
        romberg_pieces(f, -r, x, pieces, tol)? + romberg_pieces(f, x, r, pieces, tol)?
    };
    Ok(model.alpha * model.gamma / (2.0 * beta) * integral)
}

/// `A(β) = ∫₀^∞ ξ²/(1+β²ξ²)² dξ` after `ξ = t/(1−t)`, Romberg on `[0, 1]`.
pub fn a_integral_oracle(beta: f64) -> Result<f64> {
    romberg(
        |t| {
            if t >= 1.0 {
                return 1.0 / beta.powi(4);
            }
            let xi = t / (1.0 - t);
            let d = 1.0 + beta * beta * xi * xi;
            xi * xi / (d * d) / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
        1e-14,
    )
}

/// `∫₀^∞ ξ²/((1+ξ²)² + v²ξ²) dξ` (the zero-width speed integral), Romberg
/// after `ξ = t/(1−t)`.
pub fn zero_width_speed_integral(v: f64) -> Result<f64> {
    romberg(
        |t| {
            if t >= 1.0 {
                return 1.0;
            }
            let xi = t / (1.0 - t);
            let a = 1.0 + xi * xi;
            xi * xi / (a * a + v * v * xi * xi) / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
        1e-14,
    )
}

/// `π / (2√(4+v²))`.
pub fn zero_width_speed_integral_closed_form(v: f64) -> f64 {
    PI / (2.0 * (4.0 + v * v).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    /// `1 − 1/p`.
    pub fn dual_exponent(self) -> f64 {
        match self {
            Norm::L1 => 0.0,
            Norm::L2 => 0.5,
            Norm::Inf => 1.0,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::Inf => "inf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatScalingFit {
    pub k: usize,
    pub norm: Norm,
    pub slope: f64,
    /// `−(k + 1 − 1/p)/2`.
    pub expected: f64,
}

impl HeatScalingFit {
    pub fn rel_err(&self) -> f64 {
        ((self.slope - self.expected) / self.expected).abs()
    }
}

/// `∂ₓᵏ h_t(x)` for the heat kernel `h_t = e^{-x²/4t}/√(4πt)`.
pub fn heat_kernel_derivative(k: usize, t: f64, x: f64) -> f64 {
    let s = (4.0 * t).sqrt();
    let u = x / s;
    (-1.0 / s).powi(k as i32) * hermite(k, u) * (-u * u).exp() / (PI * 4.0 * t).sqrt()
}

/// Fits `log ‖∂ₓᵏ h_t‖_p` against `log t` over `times`, with the norms taken
/// on a fixed uniform grid covering `±(12√(4 t_max) + 1)`.
pub fn heat_norm_scaling(k: usize, norm: Norm, times: &[f64]) -> Result<HeatScalingFit> {
    if k > 3 {
        return Err(Error::Domain { name: "k", value: k as f64, constraint: "k <= 3" });
    }
    if times.len() < 2 || times.iter().any(|&t| t <= 0.0) {
        return Err(Error::Fit("need at least two positive times".into()));
    }
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let half = 12.0 * (4.0 * t_max).sqrt() + 1.0;
    // resolve the narrowest kernel with ≥ 200 points per unit of √(4t)
    let dx = (4.0 * t_min).sqrt() / 200.0;
    let n = (2.0 * half / dx).ceil() as usize;
    let dx = 2.0 * half / n as f64;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let vals = (0..=n).map(|i| heat_kernel_derivative(k, t, -half + dx * i as f64));
            let value = match norm {
                Norm::Inf => vals.fold(0.0, |m: f64, v| m.max(v.abs())),
                Norm::L1 => vals.map(f64::abs).sum::<f64>() * dx,
                Norm::L2 => (vals.map(|v| v * v).sum::<f64>() * dx).sqrt(),
            };
            (t.ln(), value.ln())
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate time grid".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(HeatScalingFit {
        k,
        norm,
        slope: sxy / sxx,
        expected: -(k as f64 + norm.dual_exponent()) / 2.0,
    })
}

/// One row of oracle-versus-fast comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub fast: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Compares with a relative tolerance (absolute when the oracle is 0).
    pub fn relative(quantity: impl Into<String>, oracle: f64, fast: f64, tolerance: f64) -> Self {
        let abs_err = (oracle - fast).abs();
        let rel_err = if oracle != 0.0 { abs_err / oracle.abs() } else { abs_err };
        Self { quantity: quantity.into(), oracle, fast, abs_err, rel_err, tolerance, pass: rel_err <= tolerance }
    }

    pub fn absolute(quantity: impl Into<String>, oracle: f64, fast: f64, tolerance: f64) -> Self {
        let abs_err = (oracle - fast).abs();
        let rel_err = if oracle != 0.0 { abs_err / oracle.abs() } else { abs_err };
        Self { quantity: quantity.into(), oracle, fast, abs_err, rel_err, tolerance, pass: abs_err <= tolerance }
    }

    pub const CSV_HEADER: &'static str = "quantity,oracle,fast,abs_err,rel_err,tolerance,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.quantity.replace(',', ";"), self.oracle, self.fast, self.abs_err, self.rel_err, self.tolerance, self.pass
        )
    }
}

/// The (k, p) pairs and time grid used for the heat-kernel scaling checks.
pub const HEAT_CASES: [(usize, Norm); 3] = [(0, Norm::Inf), (1, Norm::L1), (2, Norm::L2)];
pub const HEAT_TIMES: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Runs every oracle comparison for `params` (the stationary-profile and
/// Green's function checks use its α, β, γ, ε).
pub fn standard_reports(params: &ModelParams) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    for beta in [1.0, 2.0, 10.0] {
        let closed = PI / (4.0 * beta * beta * beta);
        out.push(OracleReport::relative(
            format!("a_integral(beta={beta})"),
            closed,
            analytic::a_integral(beta)?,
            1e-8,
        ));
        out.push(OracleReport::relative(
            format!("a_integral_romberg(beta={beta})"),
            closed,
            a_integral_oracle(beta)?,
            1e-8,
        ));
    }
    for i in 0..10 {
        let v = 0.5 * i as f64;
        out.push(OracleReport::absolute(
            format!("zero_width_speed_integral(v={v})"),
            zero_width_speed_integral_closed_form(v),
            zero_width_speed_integral(v)?,
            1e-9,
        ));
    }
    let g1 = SourceKernel::gaussian(1.0)?;
    for xi in [0.0, 2.0] {
        out.push(OracleReport::absolute(
            format!("gaussian_fourier(eps=1;xi={xi})"),
            kernel_fourier_by_quadrature(&g1, xi)?,
            g1.fourier(xi),
            1e-8,
        ));
    }
    let (green, _) = fourier_by_quadrature(|x| 0.5 * (-x.abs()).exp(), 1.0, 40.0)?;
    out.push(OracleReport::absolute("green_fourier(xi=1)", green, 0.5, 1e-8));

    let model = params.model()?;
    let stationary = analytic::stationary_profile(&model, 0.0);
    for i in 0..=10 {
        let x = -2.5 + 0.5 * i as f64;
        out.push(OracleReport::absolute(
            format!("stationary_vs_green(x={x})"),
            greens_convolution(&model, x)?,
            stationary.value(x)?,
            1e-8,
        ));
    }

    if let analytic::PulseOutcome::Pulse(p) = analytic::pulse_velocity(&model)? {
        for xi in [0.0, 0.5, 2.0, 7.0] {
            let g = model.kernel.fourier(xi);
            let a = 1.0 + model.beta * model.beta * xi * xi;
            let b = model.alpha * p.v_c * xi;
            let modulus = model.alpha * model.gamma * g / (a * a + b * b).sqrt();
            out.push(OracleReport::relative(
                format!("pulse_fourier_modulus(xi={xi})"),
                modulus,
                p.profile.fourier(xi).norm(),
                1e-12,
            ));
        }
    }

    for (k, norm) in HEAT_CASES {
        let fit = heat_norm_scaling(k, norm, &HEAT_TIMES)?;
        out.push(OracleReport::relative(
            format!("heat_norm_scaling(k={k};p={norm})"),
            fit.expected,
            fit.slope,
            0.02,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn romberg_smooth() {
        let v = romberg(|x| x.sin(), 0.0, PI, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_transform_by_quadrature() {
        let g = SourceKernel::gaussian(1.0).unwrap();
        assert!((kernel_fourier_by_quadrature(&g, 0.0).unwrap() - 1.0).abs() < 1e-10);
        let v = kernel_fourier_by_quadrature(&g, 2.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn two_sided_exponential_transform() {
        let (re, im) = fourier_by_quadrature(|x| 0.5 * (-x.abs()).exp(), 1.0, 40.0).unwrap();
        assert!((re - 0.5).abs() < 1e-10);
        assert!(im.abs() < 1e-12);
    }

    #[test]
    fn a_integral_by_romberg() {
        for beta in [1.0, 2.0, 10.0] {
            let exact = PI / (4.0 * beta * beta * beta);
            assert!(((a_integral_oracle(beta).unwrap() - exact) / exact).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_width_speed_integral_matches_closed_form() {
        for i in 0..10 {
            let v = 0.5 * i as f64;
            let q = zero_width_speed_integral(v).unwrap();
            assert!((q - zero_width_speed_integral_closed_form(v)).abs() < 1e-10, "v={v}");
        }
    }

    #[test]
    fn greens_convolution_zero_and_peak() {
        let zero = Model::reduced(1.0, SourceKernel::zero()).unwrap();
        assert_eq!(greens_convolution(&zero, 0.3).unwrap(), 0.0);
        let m = ModelParams::rescaled_units(1.0, 1e-3).unwrap().model().unwrap();
        assert!((greens_convolution(&m, 0.0).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn greens_convolution_agrees_with_fourier_profile() {
        let m = ModelParams::new(1.3, 0.8, 0.7, 1.0, 0.2).unwrap().model().unwrap();
        let s = analytic::stationary_profile(&m, 0.0);
        for i in 0..=20 {
            let x = -3.0 + 0.3 * i as f64;
            let d = (greens_convolution(&m, x).unwrap() - s.value(x).unwrap()).abs();
            assert!(d < 1e-10, "x={x}: {d}");
        }
    }

    #[test]
    fn heat_kernel_derivatives_by_differences() {
        let (t, x, h) = (0.3, 0.4, 1e-4);
        for k in 0..3 {
            let fd = (heat_kernel_derivative(k, t, x + h) - heat_kernel_derivative(k, t, x - h)) / (2.0 * h);
            assert!((fd - heat_kernel_derivative(k + 1, t, x)).abs() < 1e-6);
        }
    }

    #[test]
    fn heat_scaling_exponents() {
        for (k, norm) in HEAT_CASES {
            let fit = heat_norm_scaling(k, norm, &HEAT_TIMES).unwrap();
            assert!(fit.rel_err() < 0.02, "k={k} p={norm}: {}", fit.slope);
        }
        let fit = heat_norm_scaling(3, Norm::Inf, &HEAT_TIMES).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.04);
        assert!(heat_norm_scaling(4, Norm::Inf, &HEAT_TIMES).is_err());
    }

    #[test]
    fn report_pass_flag() {
        let r = OracleReport::relative("x", 2.0, 2.0 + 1e-9, 1e-8);
        assert!(r.pass);
        assert!(!OracleReport::absolute("x", 2.0, 2.1, 1e-8).pass);
        assert_eq!(r.csv_row().split(',').count(), OracleReport::CSV_HEADER.split(',').count());
    }
}
