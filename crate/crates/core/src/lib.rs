//! Traveling pulses and stationary states of a point source that drives, and
//! is driven by, a damped diffusive field:
//!
//! ```text
//! α ∂ₜs + s − β² ∂ₓₓs = αγ g(x − x_c(t)),     ẋ_c = −η ∂ₓs(t, x_c)
//! ```
//!
//! - [`model`], [`kernel`]: parameters, source kernels, the scaling map to
//!   the one-parameter reduced model.
//! - [`analytic`]: critical stiffness, pulse speed and profiles by quadrature.
//! - [`oracle`]: slow independent checks of the fast paths.
//! - [`spectral`], [`dynamics`]: periodic spectral discretization and the
//!   time stepper.
//! - [`experiments`]: stability runs, decay fits, bifurcation sweeps.
//! - [`config`], [`cli`]: JSON configuration, artifacts, the `pulselab`
//!   binary.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod spectral;
pub mod trajectory;
