//! Physical parameters, the reduced one-parameter model, and the scaling map
//! between them.
//!
//! The physical system is
//!
//! ```text
//! α ∂ₜs + s − β² ∂ₓₓs = αγ g(x − x_c(t)),     ẋ_c = −η ∂ₓs(t, x_c)
//! ```
//!
//! Substituting `s_λ(t,x) = λ^a s(λ^b t, λ^c x)` and `x_{cλ}(t) = λ^d x_c(λ^b t)`
//! with `d = −c`, `λ^b = α`, `λ^c = β`, `λ^a = 1/(αγ)` reduces it to
//! `∂ₜs + s − ∂ₓₓs = g(βx − βx_c)`, `ẋ_c = −η_r ∂ₓs` with `η_r = ηα²γ/β²`.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Result};
use crate::kernel::SourceKernel;
use crate::trajectory::{Snapshot, Trajectory, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Relaxation time.
    pub alpha: f64,
    /// Correlation length.
    pub beta: f64,
    /// Production amplitude.
    pub gamma: f64,
    /// Stiffness / mobility coupling.
    pub eta: f64,
    /// Source width.
    pub epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, gamma: 1.0, eta: 5.0, epsilon: 1e-3 }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, eta: f64, epsilon: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma, eta, epsilon };
        p.validate()?;
        Ok(p)
    }

    /// Reduced units with a Gaussian source of width `epsilon`.
    pub fn rescaled_units(eta: f64, epsilon: f64) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, eta, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("alpha", self.alpha, "alpha > 0")?;
        require_positive("beta", self.beta, "beta > 0")?;
        require_non_negative("gamma", self.gamma, "gamma >= 0")?;
        require_non_negative("eta", self.eta, "eta >= 0")?;
        require_positive("epsilon", self.epsilon, "epsilon > 0")?;
        Ok(())
    }

    /// The model with the normalized Gaussian source `g_ε`.
    pub fn model(&self) -> Result<Model> {
        self.validate()?;
        Model::new(self.alpha, self.beta, self.gamma, self.eta, SourceKernel::gaussian(self.epsilon)?)
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..*self }
    }
}

/// Coefficients and source kernel of `α ∂ₜs + s − β² ∂ₓₓs = αγ g(x − x_c)`,
/// `ẋ_c = −η ∂ₓs(t, x_c)`. This is what the analytic and dynamics modules
/// consume; it holds either physical or reduced coefficients.
#[derive(Debug, Clone)]
pub struct Model {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub kernel: SourceKernel,
}

impl Model {
    pub fn new(alpha: f64, beta: f64, gamma: f64, eta: f64, kernel: SourceKernel) -> Result<Self> {
        require_positive("alpha", alpha, "alpha > 0")?;
        require_positive("beta", beta, "beta > 0")?;
        require_non_negative("gamma", gamma, "gamma >= 0")?;
        require_non_negative("eta", eta, "eta >= 0")?;
        Ok(Self { alpha, beta, gamma, eta, kernel })
    }

    /// Reduced model `∂ₜs + s − ∂ₓₓs = g(x − x_c)`.
    pub fn reduced(eta: f64, kernel: SourceKernel) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, eta, kernel)
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..self.clone() }
    }

    /// Equilibrium total deformation `αγ ∫g`.
    pub fn equilibrium_mass(&self) -> f64 {
        self.alpha * self.gamma * self.kernel.mass()
    }

    /// `s_tot(t) = e^{-t/α} s_tot(0) + (1 − e^{-t/α}) αγ ∫g`.
    pub fn total_deformation(&self, t: f64, initial: f64) -> f64 {
        let decay = (-t / self.alpha).exp();
        decay * initial - (-t / self.alpha).exp_m1() * self.equilibrium_mass()
    }
}

/// Scale factor and exponents of the substitution
/// `s_λ(t,x) = λ^a s(λ^b t, λ^c x)`, `x_{cλ}(t) = λ^d x_c(λ^b t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ScalingExponents {
    pub fn identity() -> Self {
        Self { lambda: 1.0, a: 0.0, b: 0.0, c: 0.0, d: 0.0 }
    }

    /// `λ^e`.
    pub fn pow(&self, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else {
            (e * self.lambda.ln()).exp()
        }
    }

    /// Physical time of reduced time `t`.
    pub fn time_to_physical(&self, t: f64) -> f64 {
        self.pow(self.b) * t
    }

    pub fn position_to_physical(&self, x: f64) -> f64 {
        self.pow(-self.d) * x
    }

    pub fn field_to_physical(&self, s: f64) -> f64 {
        self.pow(-self.a) * s
    }
}

#[derive(Debug, Clone)]
pub struct RescaledParams {
    /// Dimensionless stiffness `ηα²γ/β²`.
    pub eta_r: f64,
    /// `z ↦ g(βz)`, not renormalized.
    pub kernel: SourceKernel,
    /// Set when `γ = 0`: the reduced model is source-free.
    pub degenerate: bool,
}

impl RescaledParams {
    pub fn model(&self) -> Result<Model> {
        Model::reduced(self.eta_r, self.kernel.clone())
    }
}

/// Maps physical parameters to the reduced model. Uses `λ = e`, so the
/// exponents are the logarithms of `α`, `β` and `1/(αγ)`.
pub fn rescale(params: &ModelParams) -> Result<(RescaledParams, ScalingExponents)> {
    params.validate()?;
    let kernel = SourceKernel::gaussian(params.epsilon)?;
    rescale_model(&Model::new(params.alpha, params.beta, params.gamma, params.eta, kernel)?)
}

/// [`rescale`] for an arbitrary source kernel.
pub fn rescale_model(model: &Model) -> Result<(RescaledParams, ScalingExponents)> {
    let b = model.alpha.ln();
    let c = model.beta.ln();
    let exps = |a| ScalingExponents { lambda: std::f64::consts::E, a, b, c, d: -c };
    if model.gamma == 0.0 {
        log::warn!("{}", crate::error::Error::ZeroProduction);
        return Ok((
            RescaledParams { eta_r: 0.0, kernel: SourceKernel::zero(), degenerate: true },
            exps(0.0),
        ));
    }
    let a = -(model.alpha * model.gamma).ln();
    let e = exps(a);
    let eta_r = model.eta * e.pow(e.b - e.a - 2.0 * e.c);
    Ok((
        RescaledParams { eta_r, kernel: model.kernel.dilated(model.beta)?, degenerate: false },
        e,
    ))
}

/// Maps a trajectory recorded in reduced variables back to physical ones:
/// `t = λ^b t_r`, `x_c = λ^{-d} x_r`, `s = λ^{-a} s_r`.
pub fn unscale_trajectory(traj: &Trajectory, e: &ScalingExponents) -> Trajectory {
    map_trajectory(traj, e, 1.0)
}

/// Inverse of [`unscale_trajectory`].
pub fn rescale_trajectory(traj: &Trajectory, e: &ScalingExponents) -> Trajectory {
    map_trajectory(traj, e, -1.0)
}

fn map_trajectory(traj: &Trajectory, e: &ScalingExponents, dir: f64) -> Trajectory {
    let time = e.pow(dir * e.b);
    let space = e.pow(-dir * e.d);
    let field = e.pow(-dir * e.a);
    let samples = traj
        .samples
        .iter()
        .map(|s| TrajectorySample {
            t: s.t * time,
            x_c: s.x_c * space,
            v_c: s.v_c * space / time,
            s_tot: s.s_tot * field * space,
            norm_inf: s.norm_inf * field,
            grad_inf: s.grad_inf * field / space,
        })
        .collect();
    let snapshots = traj
        .snapshots
        .iter()
        .map(|snap| Snapshot {
            t: snap.t * time,
            x: snap.x.iter().map(|x| x * space).collect(),
            s: snap.s.iter().map(|s| s * field).collect(),
        })
        .collect();
    Trajectory { samples, snapshots }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    #[test]
    fn unit_parameters_are_a_fixed_point() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 3.7, 0.2).unwrap();
        let (r, e) = rescale(&p).unwrap();
        assert!((r.eta_r - 3.7).abs() < 1e-15);
        assert_eq!((e.a, e.b, e.c, e.d), (0.0, 0.0, 0.0, 0.0));
        let g = SourceKernel::gaussian(0.2).unwrap();
        for z in [0.0, 0.1, 0.5] {
            assert!((r.kernel.profile(z) - g.profile(z)).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_maps_with_alpha_squared_gamma_over_beta_squared() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 32.0, 1e-3).unwrap();
        let (r, _) = rescale(&p).unwrap();
        assert!((r.eta_r - 8.0).abs() < 1e-12);
        let p = ModelParams::new(2.0, 1.5, 0.8, 6.0, 0.1).unwrap();
        let (r, _) = rescale(&p).unwrap();
        assert!((r.eta_r - 6.0 * 4.0 * 0.8 / 2.25).abs() < 1e-12);
    }

    #[test]
    fn rescaled_kernel_is_dilated_not_renormalized() {
        let p = ModelParams::new(1.0, 2.0, 1.0, 1.0, 0.4).unwrap();
        let (r, _) = rescale(&p).unwrap();
        let g = SourceKernel::gaussian(0.4).unwrap();
        assert!((r.kernel.profile(0.3) - g.profile(0.6)).abs() < 1e-15);
        assert!((r.kernel.mass() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_production_is_flagged() {
        let p = ModelParams::new(1.5, 1.0, 0.0, 2.0, 0.1).unwrap();
        let (r, _) = rescale(&p).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.eta_r, 0.0);
        assert!(r.kernel.is_zero());
    }

    #[test]
    fn rejects_negative_beta() {
        let err = ModelParams::new(1.0, -1.0, 1.0, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Domain { constraint: "beta > 0", .. }));
    }

    #[test]
    fn mass_law_closed_form() {
        let m = ModelParams::new(2.0, 1.0, 0.5, 1.0, 0.1).unwrap().model().unwrap();
        assert!((m.total_deformation(0.0, 3.0) - 3.0).abs() < 1e-15);
        let t = 1.7;
        let expect = (-t / 2.0f64).exp() * 3.0 + (1.0 - (-t / 2.0f64).exp()) * 1.0;
        assert!((m.total_deformation(t, 3.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn position_samples_follow_lambda_power() {
        let p = ModelParams::new(2.0, 1.5, 0.8, 1.0, 0.1).unwrap();
        let (_, e) = rescale(&p).unwrap();
        let traj = Trajectory {
            samples: vec![TrajectorySample { t: 0.5, x_c: 0.25, v_c: 1.0, s_tot: 1.0, norm_inf: 1.0, grad_inf: 1.0 }],
            snapshots: vec![],
        };
        let phys = unscale_trajectory(&traj, &e);
        // x_c(t) = λ^{-d} x_{cλ}(λ^{-b} t) with λ^b = α, λ^{-d} = β
        assert!((phys.samples[0].t - 1.0).abs() < 1e-15);
        assert!((phys.samples[0].x_c - 0.375).abs() < 1e-15);
        assert!((phys.samples[0].v_c - 0.75).abs() < 1e-15);
        let id = unscale_trajectory(&traj, &ScalingExponents::identity());
        assert_eq!(id, traj);
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.1f64..10.0, 0.1f64..10.0, 0.05f64..10.0, 0.0f64..50.0, 1e-3f64..2.0)
            .prop_map(|(a, b, g, n, e)| ModelParams::new(a, b, g, n, e).unwrap())
    }

    proptest! {
        #[test]
        fn exponents_satisfy_normalization(p in arb_params()) {
            let (r, e) = rescale(&p).unwrap();
            prop_assert!((e.d + e.c).abs() < 1e-15);
            prop_assert!((e.pow(e.b) / p.alpha - 1.0).abs() < 1e-12);
            prop_assert!((e.pow(e.c) / p.beta - 1.0).abs() < 1e-12);
            prop_assert!((e.pow(e.a) * p.gamma * p.alpha - 1.0).abs() < 1e-12);
            let expect = p.eta * p.alpha * p.alpha * p.gamma / (p.beta * p.beta);
            prop_assert!((r.eta_r - expect).abs() <= 1e-12 * expect.max(1.0));
        }

        #[test]
        fn trajectory_round_trip(
            p in arb_params(),
            pts in proptest::collection::vec((0.0f64..50.0, -20.0f64..20.0, -3.0f64..3.0, 0.0f64..5.0), 1..40),
        ) {
            let (_, e) = rescale(&p).unwrap();
            let traj = Trajectory {
                samples: pts.iter().map(|&(t, x, v, m)| TrajectorySample {
                    t, x_c: x, v_c: v, s_tot: m, norm_inf: m * 0.3, grad_inf: m * 0.1,
                }).collect(),
                snapshots: vec![Snapshot { t: 1.0, x: vec![-1.0, 0.0, 2.0], s: vec![0.1, 0.5, 0.2] }],
            };
            let back = rescale_trajectory(&unscale_trajectory(&traj, &e), &e);
            for (a, b) in traj.samples.iter().zip(&back.samples) {
                prop_assert!((a.t - b.t).abs() <= 1e-12 * a.t.abs().max(1.0));
                prop_assert!((a.x_c - b.x_c).abs() <= 1e-12);
                prop_assert!((a.v_c - b.v_c).abs() <= 1e-12);
                prop_assert!((a.s_tot - b.s_tot).abs() <= 1e-12);
            }
            for (a, b) in traj.snapshots[0].s.iter().zip(&back.snapshots[0].s) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
