//! Source kernels: the even, non-negative, rapidly decaying production
//! profile `g` together with its Fourier transform
//! `ĝ(ξ) = ∫ g(x) e^{-ixξ} dx` and a Gaussian decay certificate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{require_positive, Error, Result};
use crate::quad::{integrate, QuadOptions};

/// `max(|g|, |g'|, |g''|) ≤ bound · exp(-rate · z²)` for all `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub bound: f64,
    pub rate: f64,
}

impl DecayCertificate {
    pub fn envelope(&self, z: f64) -> f64 {
        self.bound * (-self.rate * z * z).exp()
    }
}

/// A unit-scale kernel family member. [`SourceKernel`] adds amplitude and
/// dilation on top.
pub trait KernelShape: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn value(&self, z: f64) -> f64;
    /// `order`-th derivative; `None` past the implemented order.
    fn derivative(&self, z: f64, order: usize) -> Option<f64>;
    fn fourier(&self, xi: f64) -> f64;
    fn mass(&self) -> f64;
    fn decay_certificate(&self) -> DecayCertificate;
    fn smoothness_order(&self) -> usize;
    /// `|z|` beyond which `|g(z)| < tol`.
    fn support_radius(&self, tol: f64) -> f64;
    /// `ξ` beyond which `|ĝ(ξ)| < tol`, if such a bound is known in closed form.
    fn fourier_cutoff(&self, tol: f64) -> Option<f64>;

    /// `sup |g^{(order)}|`, by dense sampling over the support.
    fn sup_norm(&self, order: usize) -> f64 {
        let r = self.support_radius(1e-300_f64.max(f64::MIN_POSITIVE));
        let n = 200_000;
        (0..=n)
            .filter_map(|i| {
                let z = -r + 2.0 * r * i as f64 / n as f64;
                self.derivative(z, order)
            })
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Physicists' Hermite polynomial `H_n(u)`.
pub fn hermite(n: usize, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    match n {
        0 => h0,
        1 => h1,
        _ => {
            for k in 1..n {
                let h2 = 2.0 * u * h1 - 2.0 * k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

/// `g_ε(x) = exp(-x²/ε²) / (ε√π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub epsilon: f64,
}

impl Gaussian {
    pub fn new(epsilon: f64) -> Result<Self> {
        require_positive("epsilon", epsilon, "epsilon > 0")?;
        Ok(Self { epsilon })
    }

    fn peak(&self) -> f64 {
        1.0 / (self.epsilon * PI.sqrt())
    }
}

impl KernelShape for Gaussian {
    fn name(&self) -> String {
        format!("gaussian(epsilon={})", self.epsilon)
    }

    fn value(&self, z: f64) -> f64 {
        let u = z / self.epsilon;
        self.peak() * (-u * u).exp()
    }

    fn derivative(&self, z: f64, order: usize) -> Option<f64> {
        let u = z / self.epsilon;
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some(sign * hermite(order, u) * self.value(z) / self.epsilon.powi(order as i32))
    }

    fn fourier(&self, xi: f64) -> f64 {
        let e = self.epsilon * xi;
        (-0.25 * e * e).exp()
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn decay_certificate(&self) -> DecayCertificate {
        // With m = 1/(2ε²) the polynomial prefactors of g', g'' are absorbed:
        // |2u| e^{-u²/2} ≤ 2e^{-1/2}, |4u² - 2| e^{-u²/2} ≤ 8e^{-5/4}.
        let e = self.epsilon;
        let first = 2.0 * (-0.5f64).exp() / e;
        let second = (8.0 * (-1.25f64).exp()).max(2.0) / (e * e);
        DecayCertificate {
            bound: self.peak() * 1.0f64.max(first).max(second),
            rate: 0.5 / (e * e),
        }
    }

    fn smoothness_order(&self) -> usize {
        usize::MAX
    }

    fn support_radius(&self, tol: f64) -> f64 {
        let c = self.peak();
        if tol >= c {
            0.0
        } else {
            // polynomial factors of higher derivatives need a little room
            self.epsilon * ((c / tol).ln().sqrt() + 2.0)
        }
    }

    fn fourier_cutoff(&self, tol: f64) -> Option<f64> {
        Some(2.0 * (1.0 / tol).ln().max(0.0).sqrt() / self.epsilon)
    }

    fn sup_norm(&self, order: usize) -> f64 {
        // |H_n(u) e^{-u²}| peaks inside |u| < √(2n+1) + 1
        let r = (2.0 * order as f64 + 1.0).sqrt() + 1.0;
        let n = 100_000;
        let mut best = 0.0_f64;
        for i in 0..=n {
            let u = r * i as f64 / n as f64;
            best = best.max((hermite(order, u) * (-u * u).exp()).abs());
        }
        best * self.peak() / self.epsilon.powi(order as i32)
    }
}

/// Compactly supported `C^∞` bump `A exp(-1/(1 - (z/w)²))` on `|z| < w`,
/// normalized to unit mass. Its Fourier transform is evaluated by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactBump {
    pub width: f64,
    norm: f64,
}

impl CompactBump {
    pub fn new(width: f64) -> Result<Self> {
        require_positive("width", width, "width > 0")?;
        let raw = |z: f64| {
            let u = z / width;
            if u.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - u * u)).exp()
            }
        };
        let m = integrate(raw, -width, width, QuadOptions::default().with_initial_panels(8))?;
        Ok(Self { width, norm: 1.0 / m.value })
    }
}

impl KernelShape for CompactBump {
    fn name(&self) -> String {
        format!("bump(width={})", self.width)
    }

    fn value(&self, z: f64) -> f64 {
        let u = z / self.width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.norm * (-1.0 / (1.0 - u * u)).exp()
        }
    }

    fn derivative(&self, z: f64, order: usize) -> Option<f64> {
        let w = self.width;
        let u = z / w;
        if u.abs() >= 1.0 {
            return if order <= 2 { Some(0.0) } else { None };
        }
        let q = 1.0 - u * u;
        let phi = self.value(z);
        let h = -2.0 * u / (w * q * q);
        match order {
            0 => Some(phi),
            1 => Some(phi * h),
            2 => {
                let dh = -2.0 / (w * w) * (1.0 / (q * q) + 4.0 * u * u / (q * q * q));
                Some(phi * (h * h + dh))
            }
            _ => None,
        }
    }

    fn fourier(&self, xi: f64) -> f64 {
        let panels = (xi.abs() * self.width / PI).ceil() as usize + 8;
        integrate(
            |z| 2.0 * self.value(z) * (xi * z).cos(),
            0.0,
            self.width,
            QuadOptions { abs_tol: 1e-13, ..QuadOptions::default() }.with_initial_panels(panels),
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    }

    fn mass(&self) -> f64 {
        1.0
    }

    fn decay_certificate(&self) -> DecayCertificate {
        // e^{-z²/w²} ≥ e^{-1} on the support
        let sup = (0..=2).map(|k| self.sup_norm(k)).fold(0.0, f64::max);
        DecayCertificate {
            bound: std::f64::consts::E * sup,
            rate: 1.0 / (self.width * self.width),
        }
    }

    fn smoothness_order(&self) -> usize {
        2
    }

    fn support_radius(&self, _tol: f64) -> f64 {
        self.width
    }

    /// `|ĝ(ξ)| ≲ e^{-√(2wξ)}` for large `ξ`; the extra margin in the exponent
    /// covers the algebraic prefactor.
    fn fourier_cutoff(&self, tol: f64) -> Option<f64> {
        let l = (1.0 / tol.min(0.5)).ln() + 10.0;
        Some(l * l / (2.0 * self.width))
    }
}

/// A kernel `z ↦ amplitude · shape(dilation · z)`.
///
/// Dilation does not renormalize: the mass of `g(βz)` is `mass / β`.
#[derive(Clone)]
pub struct SourceKernel {
    shape: Arc<dyn KernelShape>,
    amplitude: f64,
    dilation: f64,
}

impl fmt::Debug for SourceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl SourceKernel {
    /// The normalized Gaussian `g_ε`.
    pub fn gaussian(epsilon: f64) -> Result<Self> {
        Ok(Self::from_shape(Arc::new(Gaussian::new(epsilon)?)))
    }

    pub fn bump(width: f64) -> Result<Self> {
        Ok(Self::from_shape(Arc::new(CompactBump::new(width)?)))
    }

    pub fn from_shape(shape: Arc<dyn KernelShape>) -> Self {
        Self { shape, amplitude: 1.0, dilation: 1.0 }
    }

    /// The identically zero source.
    pub fn zero() -> Self {
        Self {
            shape: Arc::new(Gaussian { epsilon: 1.0 }),
            amplitude: 0.0,
            dilation: 1.0,
        }
    }

    /// `z ↦ g(factor · z)`.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        require_positive("dilation", factor, "dilation > 0")?;
        Ok(Self { dilation: self.dilation * factor, ..self.clone() })
    }

    /// `z ↦ factor · g(z)`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::Domain { name: "amplitude", value: factor, constraint: "amplitude >= 0" });
        }
        Ok(Self { amplitude: self.amplitude * factor, ..self.clone() })
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    pub fn describe(&self) -> String {
        format!("{} x amplitude {} x dilation {}", self.shape.name(), self.amplitude, self.dilation)
    }

    pub fn profile(&self, z: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.amplitude * self.shape.value(self.dilation * z)
    }

    pub fn derivative(&self, z: f64, order: usize) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        self.shape
            .derivative(self.dilation * z, order)
            .map(|d| self.amplitude * self.dilation.powi(order as i32) * d)
    }

    pub fn fourier(&self, xi: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.amplitude / self.dilation * self.shape.fourier(xi / self.dilation)
    }

    pub fn mass(&self) -> f64 {
        self.amplitude / self.dilation * self.shape.mass()
    }

    pub fn decay_certificate(&self) -> DecayCertificate {
        if self.is_zero() {
            return DecayCertificate { bound: 0.0, rate: 1.0 };
        }
        let c = self.shape.decay_certificate();
        let d = self.dilation;
        DecayCertificate {
            bound: self.amplitude * 1.0f64.max(d).max(d * d) * c.bound,
            rate: c.rate * d * d,
        }
    }

    pub fn smoothness_order(&self) -> usize {
        self.shape.smoothness_order()
    }

    pub fn sup_norm(&self, order: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.amplitude * self.dilation.powi(order as i32) * self.shape.sup_norm(order)
    }

    /// `‖∂^m g‖_∞` for `m = 0..=k`.
    pub fn wkinf_norms(&self, k: usize) -> Vec<f64> {
        (0..=k).map(|m| self.sup_norm(m)).collect()
    }

    pub fn support_radius(&self, tol: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.shape.support_radius(tol / self.amplitude) / self.dilation
    }

    pub fn fourier_cutoff(&self, tol: f64) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        self.shape
            .fourier_cutoff(tol * self.dilation / self.amplitude)
            .map(|c| c * self.dilation)
    }

    /// Checks evenness, positivity and the decay certificate on `samples`.
    pub fn check_invariants(&self, samples: &[f64]) -> Result<()> {
        let cert = self.decay_certificate();
        let scale = self.sup_norm(0).max(f64::MIN_POSITIVE);
        for &z in samples {
            let g = self.profile(z);
            if (g - self.profile(-z)).abs() > 1e-14 * scale {
                return Err(Error::Domain { name: "kernel evenness", value: z, constraint: "g(z) = g(-z)" });
            }
            if g < 0.0 {
                return Err(Error::Domain { name: "kernel positivity", value: z, constraint: "g(z) >= 0" });
            }
            for order in 0..=2usize.min(self.smoothness_order()) {
                if let Some(d) = self.derivative(z, order) {
                    if d.abs() > cert.envelope(z) * (1.0 + 1e-12) {
                        return Err(Error::Domain {
                            name: "kernel decay certificate",
                            value: z,
                            constraint: "|g^(k)(z)| <= M exp(-m z^2), k <= 2",
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| -r + 2.0 * r * i as f64 / n as f64).collect()
    }

    #[test]
    fn gaussian_peak_and_mass() {
        let g = SourceKernel::gaussian(1.0).unwrap();
        assert!((g.profile(0.0) - 0.564_189_583_547_756_3).abs() < 1e-15);
        for eps in [1e-3, 0.2, 1.0, 7.5] {
            assert_eq!(SourceKernel::gaussian(eps).unwrap().mass(), 1.0);
        }
    }

    #[test]
    fn gaussian_transform_closed_form() {
        let g = SourceKernel::gaussian(1.0).unwrap();
        assert!((g.fourier(2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g.fourier(0.0), g.mass());
        assert_eq!(g.fourier(3.3), g.fourier(-3.3));
    }

    #[test]
    fn rejects_non_positive_width() {
        assert!(matches!(SourceKernel::gaussian(0.0), Err(Error::Domain { .. })));
        assert!(matches!(SourceKernel::gaussian(-1.0), Err(Error::Domain { .. })));
        assert!(SourceKernel::bump(-0.5).is_err());
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let g = SourceKernel::gaussian(0.7).unwrap();
        let h = 1e-5;
        for z in [-1.3, -0.2, 0.0, 0.4, 1.9] {
            let fd1 = (g.profile(z + h) - g.profile(z - h)) / (2.0 * h);
            let fd2 = (g.profile(z + h) - 2.0 * g.profile(z) + g.profile(z - h)) / (h * h);
            assert!((g.derivative(z, 1).unwrap() - fd1).abs() < 1e-8);
            assert!((g.derivative(z, 2).unwrap() - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn gaussian_certificate_holds_on_samples() {
        for eps in [1e-3, 0.1, 1.0] {
            let g = SourceKernel::gaussian(eps).unwrap();
            g.check_invariants(&grid(12.0 * eps, 4001)).unwrap();
            assert!(g.decay_certificate().rate < 1.0 / (eps * eps));
        }
    }

    #[test]
    fn dilation_keeps_physical_mass() {
        let g = SourceKernel::gaussian(0.3).unwrap().dilated(2.0).unwrap();
        assert!((g.mass() - 0.5).abs() < 1e-15);
        // g(2z) is the ε/2 Gaussian with half the mass
        let h = SourceKernel::gaussian(0.15).unwrap();
        for z in [0.0, 0.05, 0.2] {
            assert!((g.profile(z) - 0.5 * h.profile(z)).abs() < 1e-13);
        }
        for xi in [0.0, 3.0, 11.0] {
            assert!((g.fourier(xi) - 0.5 * h.fourier(xi)).abs() < 1e-15);
        }
        g.check_invariants(&grid(1.0, 801)).unwrap();
    }

    #[test]
    fn zero_kernel() {
        let z = SourceKernel::zero();
        assert!(z.is_zero());
        assert_eq!(z.profile(0.0), 0.0);
        assert_eq!(z.fourier(1.0), 0.0);
        assert_eq!(z.mass(), 0.0);
    }

    #[test]
    fn bump_invariants_and_transform() {
        let b = SourceKernel::bump(0.5).unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-12);
        assert!((b.fourier(0.0) - 1.0).abs() < 1e-10);
        b.check_invariants(&grid(0.6, 1201)).unwrap();
        assert_eq!(b.profile(0.5), 0.0);
        assert!(b.fourier(4.0) < 1.0);
        // reference transform values from a 40-digit evaluation
        assert!((b.fourier(200.0) - 5.0339e-6).abs() < 1e-9);
        let cut = b.fourier_cutoff(1e-14).unwrap();
        assert!(b.fourier(cut).abs() < 1e-13);
    }

    #[test]
    fn sup_norms_of_gaussian() {
        let eps = 0.5;
        let g = SourceKernel::gaussian(eps).unwrap();
        let c = 1.0 / (eps * PI.sqrt());
        let n = g.wkinf_norms(2);
        assert!((n[0] - c).abs() < 1e-12);
        assert!((n[1] - c * 2f64.sqrt() * (-0.5f64).exp() / eps).abs() < 1e-8);
        assert!((n[2] - 2.0 * c / (eps * eps)).abs() < 1e-10);
    }
}
