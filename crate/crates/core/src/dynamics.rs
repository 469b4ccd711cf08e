//! Time integration of the coupled field/position system on a periodic grid.
//!
//! Each Fourier mode obeys `∂ₜŝ = −λ ŝ + γ ĝ e^{−iξ x_c(t)}` with
//! `λ = (1 + β²ξ²)/α`. Over a step the cluster path is replaced by the chord
//! through its end points, for which the Duhamel integral is exact:
//!
//! ```text
//! ŝ(h) = e^{−λh} ŝ(0) + γ ĝ e^{−iξ x(h)} h φ(μh),   μ = λ − iξ w,  φ(z) = (1 − e^{−z})/z
//! ```
//!
//! The position is advanced by two-stage Gauss collocation; the stage values
//! and the field along each chord are found together by Picard iteration.
//!
//! Modes above the grid cutoff are not represented, yet for a narrow source
//! they carry a visible share of `∂ₓs` at the source. They relax on a time
//! scale `α/(β²ξ²)` far below the step, so their contribution is closed with
//! its quasi-steady value: a moving source at speed `v` receives
//! `η v Θ(v)`, `Θ(v) = (α²γ/π) ∫_{K}^{∞} ξ² ĝ / ((1+β²ξ²)² + α²v²ξ²) dξ`.

use std::borrow::Cow;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::bisect_decreasing;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quad::{FixedRule, QuadOptions};
use crate::spectral::{barycentric_eval, Field, SpectralGrid};
use crate::trajectory::{Snapshot, Trajectory, TrajectorySample};

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const GAUSS_C: [f64; 2] = [0.5 - SQRT3_6, 0.5 + SQRT3_6];
const GAUSS_A: [[f64; 2]; 2] = [[0.25, 0.25 - SQRT3_6], [0.25 + SQRT3_6, 0.25]];

/// Slack allowed in the a-priori `W^{k,∞}` bound.
pub const BOUND_SLACK: f64 = 1e-6;
/// Relative tolerance of the total-deformation law.
pub const MASS_LAW_TOL: f64 = 1e-6;
/// The run-start contraction estimate must satisfy `C·dt² < CONTRACTION_LIMIT`.
pub const CONTRACTION_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method", deny_unknown_fields)]
pub enum GradientMethod {
    /// Direct summation of the differentiated trigonometric interpolant.
    Spectral,
    /// Barycentric interpolation of spectral derivative samples.
    Barycentric { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub gradient: GradientMethod,
    pub subgrid_tail: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            picard_tol: 1e-12,
            picard_max_iters: 50,
            gradient: GradientMethod::Spectral,
            subgrid_tail: true,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        crate::error::require_positive("dt", self.dt, "dt > 0")?;
        crate::error::require_positive("picard_tol", self.picard_tol, "picard_tol > 0")?;
        if self.picard_max_iters == 0 {
            return Err(Error::Config("picard_max_iters must be >= 1".into()));
        }
        if let GradientMethod::Barycentric { order } = self.gradient {
            if order == 0 || order > 16 {
                return Err(Error::Config(format!("barycentric order {order} must be in 1..=16")));
            }
        }
        Ok(())
    }
}

/// Quasi-steady contribution of the unresolved modes to `∂ₓs` at the source.
#[derive(Debug, Clone)]
pub struct TailClosure {
    weight: Vec<f64>,
    a2: Vec<f64>,
    b2: Vec<f64>,
}

impl TailClosure {
    pub fn new(model: &Model, cutoff: f64) -> Result<Option<Self>> {
        if model.kernel.is_zero() || model.gamma == 0.0 {
            return Ok(None);
        }
        let scale = model.alpha * model.alpha * model.gamma / std::f64::consts::PI;
        let density = |xi: f64| {
            let a = 1.0 + model.beta * model.beta * xi * xi;
            scale * xi * xi * model.kernel.fourier(xi) / (a * a)
        };
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-10, ..QuadOptions::default() }.with_initial_panels(16);
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match model.kernel.fourier_cutoff(1e-16) {
            Some(top) if top <= cutoff => return Ok(None),
            Some(top) => {
                let rule = FixedRule::adapted_to(density, cutoff, top, opts)?;
                (rule.nodes, rule.weights)
            }
            None => {
                let map = |t: f64| cutoff + (1.0 - t) / t;
                let rule = FixedRule::adapted_to(|t| density(map(t)) / (t * t), 0.0, 1.0, opts)?;
                let nodes = rule.nodes.iter().map(|&t| map(t)).collect();
                let weights = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w / (t * t)).collect();
                (nodes, weights)
            }
        };
        let mut out = Self { weight: Vec::new(), a2: Vec::new(), b2: Vec::new() };
        for (xi, w) in nodes.into_iter().zip(weights) {
            let a = 1.0 + model.beta * model.beta * xi * xi;
            out.weight.push(w * scale * xi * xi * model.kernel.fourier(xi));
            out.a2.push(a * a);
            out.b2.push(model.alpha * model.alpha * xi * xi);
        }
        Ok(Some(out))
    }

    pub fn theta(&self, v: f64) -> f64 {
        let v2 = v * v;
        self.weight
            .iter()
            .zip(self.a2.iter().zip(&self.b2))
            .map(|(w, (a2, b2))| w / (a2 + b2 * v2))
            .sum()
    }
}

/// `(1 − e^{−z})/z`.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm_sqr() < 0.01 {
        // Σ (−z)^k/(k+1)!, truncated well below roundoff for |z| < 0.1
        let mut acc = Complex64::new(1.0 / 479_001_600.0, 0.0);
        for k in (0..11).rev() {
            let f = (1..=k + 1).product::<usize>() as f64;
            acc = Complex64::new(1.0 / f, 0.0) - z * acc;
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) - (-z).exp()) / z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub field: Field,
    /// Position in the box frame.
    pub x_c: f64,
    pub v_c_inst: f64,
    /// Accumulated re-centering shift; lab position is `x_c + offset`.
    pub offset: f64,
}

impl SimState {
    pub fn lab_position(&self) -> f64 {
        self.x_c + self.offset
    }

    /// Mirror image `x ↦ −x` of field and position.
    pub fn reflected(&self) -> Self {
        Self {
            t: self.t,
            field: self.field.reflected(),
            x_c: -self.x_c,
            v_c_inst: -self.v_c_inst,
            offset: -self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepStats {
    pub iters: usize,
    pub change: f64,
}

/// Per-mode data and the step rule for one model on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub model: Model,
    pub grid: Arc<SpectralGrid>,
    pub cfg: StepConfig,
    xi: Vec<f64>,
    rate: Vec<f64>,
    forcing: Vec<f64>,
    tail: Option<TailClosure>,
    decay_cache: Vec<(f64, Vec<f64>)>,
}

impl Stepper {
    pub fn new(model: Model, grid: Arc<SpectralGrid>, cfg: StepConfig) -> Result<Self> {
        cfg.validate()?;
        let ny = grid.nyquist();
        let xi: Vec<f64> = (0..grid.n_modes()).map(|j| grid.xi(j)).collect();
        let rate = xi.iter().map(|x| (1.0 + model.beta * model.beta * x * x) / model.alpha).collect();
        let forcing = xi
            .iter()
            .enumerate()
            .map(|(j, &x)| if j == ny { 0.0 } else { model.gamma * model.kernel.fourier(x) })
            .collect();
        let tail = if cfg.subgrid_tail { TailClosure::new(&model, grid.resolved_cutoff())? } else { None };
        let mut s = Self { model, grid, cfg, xi, rate, forcing, tail, decay_cache: Vec::new() };
        for h in [GAUSS_C[0] * cfg.dt, GAUSS_C[1] * cfg.dt, cfg.dt] {
            let d = s.decay(h).into_owned();
            s.decay_cache.push((h, d));
        }
        Ok(s)
    }

    pub fn tail(&self) -> Option<&TailClosure> {
        self.tail.as_ref()
    }

    fn decay(&self, h: f64) -> Cow<'_, [f64]> {
        if let Some((_, d)) = self.decay_cache.iter().find(|(k, _)| *k == h) {
            return Cow::Borrowed(d);
        }
        Cow::Owned(self.rate.iter().map(|r| (-r * h).exp()).collect())
    }

    /// Advances the field by `h` while the source moves linearly from `x0`
    /// to `x1`.
    pub fn propagate(&self, coeffs: &[Complex64], h: f64, x0: f64, x1: f64) -> Vec<Complex64> {
        let decay = self.decay(h);
        let dx = x1 - x0;
        let k1 = self.xi[1];
        let end_step = Complex64::from_polar(1.0, -k1 * x1);
        let drift_step = Complex64::from_polar(1.0, k1 * dx);
        let mut end_phase = Complex64::new(1.0, 0.0);
        let mut drift = Complex64::new(1.0, 0.0);
        let mut out = Vec::with_capacity(coeffs.len());
        for j in 0..coeffs.len() {
            let mut c = coeffs[j] * decay[j];
            let f = self.forcing[j];
            if f != 0.0 {
                let z = Complex64::new(self.rate[j] * h, -self.xi[j] * dx);
                let phi = if z.norm_sqr() < 0.01 {
                    phi1(z)
                } else {
                    (Complex64::new(1.0, 0.0) - drift * decay[j]) / z
                };
                c += end_phase * phi * (f * h);
            }
            out.push(c);
            end_phase *= end_step;
            drift *= drift_step;
        }
        out
    }

    /// [`Stepper::propagate`] on a [`Field`].
    pub fn propagate_field(&self, field: &Field, h: f64, x0: f64, x1: f64) -> Field {
        Field { grid: field.grid.clone(), coeffs: self.propagate(&field.coeffs, h, x0, x1) }
    }

    /// Resolved `∂ₓs(x)` by the configured method.
    pub fn gradient(&self, coeffs: &[Complex64], x: f64) -> f64 {
        match self.cfg.gradient {
            GradientMethod::Spectral => self.grid.eval_derivative(coeffs, x),
            GradientMethod::Barycentric { order } => {
                let d = self.grid.derivative_samples(coeffs, 1);
                barycentric_eval(&self.grid, &d, x, order)
            }
        }
    }

    /// `−η ∂ₓs(x)`, including the closed unresolved share when enabled.
    pub fn velocity(&self, coeffs: &[Complex64], x: f64, guess: f64) -> f64 {
        if self.model.eta == 0.0 {
            return 0.0;
        }
        let g = self.gradient(coeffs, x);
        self.close_velocity(g, guess)
    }

    fn close_velocity(&self, grad: f64, guess: f64) -> f64 {
        let eta = self.model.eta;
        match &self.tail {
            None => -eta * grad,
            Some(tail) => {
                let mut v = guess;
                for _ in 0..30 {
                    let next = -eta * grad / (1.0 - eta * tail.theta(v));
                    let done = (next - v).abs() <= 1e-15 * (1.0 + next.abs());
                    v = next;
                    if done {
                        break;
                    }
                }
                v
            }
        }
    }

    pub fn state(&self, field: Field, x_c: f64) -> Result<SimState> {
        if field.grid.as_ref() != self.grid.as_ref() {
            return Err(Error::Grid("field lives on a different grid".into()));
        }
        if self.tail.as_ref().is_some_and(|t| self.model.eta * t.theta(0.0) >= 1.0) {
            return Err(Error::Grid("grid too coarse: unresolved share of the gradient exceeds 1/eta".into()));
        }
        let v = self.velocity(&field.coeffs, x_c, 0.0);
        Ok(SimState { t: 0.0, field, x_c, v_c_inst: v, offset: 0.0 })
    }

    /// One step of length `h` from `state`.
    pub fn step_by(&self, state: &SimState, h: f64) -> Result<(SimState, StepStats)> {
        let x0 = state.x_c;
        let c0 = &state.field.coeffs;
        let mut f = [state.v_c_inst; 2];
        let mut stats = StepStats::default();
        let mut converged = false;
        for iter in 1..=self.cfg.picard_max_iters {
            let mut next = [0.0; 2];
            for i in 0..2 {
                let xi = x0 + h * (GAUSS_A[i][0] * f[0] + GAUSS_A[i][1] * f[1]);
                let ci = self.propagate(c0, GAUSS_C[i] * h, x0, xi);
                next[i] = self.velocity(&ci, xi, f[i]);
            }
            let change = h * (next[0] - f[0]).abs().max((next[1] - f[1]).abs());
            f = next;
            stats = StepStats { iters: iter, change };
            if !change.is_finite() {
                break;
            }
            if change <= self.cfg.picard_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::StepRejected { iters: stats.iters, change: stats.change });
        }
        let x1 = x0 + 0.5 * h * (f[0] + f[1]);
        let coeffs = self.propagate(c0, h, x0, x1);
        let v = self.velocity(&coeffs, x1, f[1]);
        let field = Field { grid: state.field.grid.clone(), coeffs };
        Ok((SimState { t: state.t + h, field, x_c: x1, v_c_inst: v, offset: state.offset }, stats))
    }

    /// One configured step; on Picard failure retries as two half steps,
    /// down to `dt/64`.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepStats)> {
        self.step_adaptive(state, self.cfg.dt, 0)
    }

    fn step_adaptive(&self, state: &SimState, h: f64, depth: usize) -> Result<(SimState, StepStats)> {
        match self.step_by(state, h) {
            Err(Error::StepRejected { .. }) if depth < 6 => {
                log::debug!("Picard iteration did not converge at t = {}; halving dt to {}", state.t, h / 2.0);
                let (mid, a) = self.step_adaptive(state, 0.5 * h, depth + 1)?;
                let (end, b) = self.step_adaptive(&mid, 0.5 * h, depth + 1)?;
                Ok((end, StepStats { iters: a.iters.max(b.iters), change: a.change.max(b.change) }))
            }
            other => other,
        }
    }

    /// Shifts the field by whole cells so that `x_c` returns near the box
    /// center; a no-op while `|x_c| ≤ L/2`.
    pub fn recenter(&self, state: &mut SimState) {
        if state.x_c.abs() <= 0.5 * self.grid.half_width() {
            return;
        }
        let m = (state.x_c / self.grid.dx()).round() as i64;
        self.grid.shift_cells(&mut state.field.coeffs, -m);
        let shift = m as f64 * self.grid.dx();
        state.x_c -= shift;
        state.offset += shift;
    }

    /// The discrete stationary state centered at `center`:
    /// `ŝ_j = αγ ĝ_j e^{−iξ_j x₀}/(1 + β²ξ_j²)`.
    pub fn stationary_field(&self, center: f64) -> Field {
        self.pulse_field(center, 0.0)
    }

    /// The discrete traveling state at speed `v`:
    /// `ŝ_j = αγ ĝ_j e^{−iξ_j x₀}/(1 + β²ξ_j² − iαvξ_j)`.
    pub fn pulse_field(&self, center: f64, v: f64) -> Field {
        let m = &self.model;
        let coeffs = self
            .xi
            .iter()
            .zip(&self.forcing)
            .map(|(&xi, &f)| {
                let den = Complex64::new(1.0 + m.beta * m.beta * xi * xi, -m.alpha * v * xi);
                Complex64::from_polar(1.0, -xi * center) * (m.alpha * f) / den
            })
            .collect();
        Field { grid: self.grid.clone(), coeffs }
    }

    /// `η [(α²γ/L) Σ ξ_j² ĝ_j / D_j(v) + Θ(v)] − 1` over the resolved modes.
    pub fn grid_speed_residual(&self, v: f64) -> f64 {
        let m = &self.model;
        let l = self.grid.half_width();
        let ny = self.grid.nyquist();
        let mut sum = 0.0;
        for j in 1..ny {
            let xi = self.xi[j];
            let a = 1.0 + m.beta * m.beta * xi * xi;
            let b = m.alpha * v * xi;
            sum += xi * xi * self.forcing[j] / (a * a + b * b);
        }
        let theta = self.tail.as_ref().map_or(0.0, |t| t.theta(v));
        m.eta * (m.alpha * m.alpha * sum / l + theta) - 1.0
    }

    /// Speed of the discrete traveling state, or `None` below the discrete
    /// threshold.
    pub fn grid_pulse_speed(&self) -> Result<Option<f64>> {
        if self.model.eta == 0.0 || self.grid_speed_residual(0.0) <= 0.0 {
            return Ok(None);
        }
        bisect_decreasing(|v| Ok(self.grid_speed_residual(v)), 0.0, 1e-13).map(Some)
    }

    /// `η ‖·‖_{W^{2,∞}}` of the larger of `field` and the stationary state.
    pub fn contraction_estimate(&self, field: &Field) -> f64 {
        let w2 = |f: &Field| f.wkinf_norms(2).iter().sum::<f64>();
        self.model.eta * w2(field).max(w2(&self.stationary_field(0.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub t_final: f64,
    /// Record a trajectory sample every this many steps.
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
    /// Highest derivative order in the a-priori bound check.
    pub bound_order: usize,
    /// Edge level above which the run warns about domain truncation. The
    /// effective floor is never below the ringing that the discrete
    /// stationary profile shows at the edge.
    pub truncation_floor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { t_final: 10.0, output_stride: 100, snapshot_times: Vec::new(), bound_order: 2, truncation_floor: 1e-10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub max_picard_iters: usize,
    /// `max |s_tot − law| / (1 + |s_tot(0)|)` over output times.
    pub mass_law_max_err: f64,
    /// Largest `‖∂ᵐs‖ − bound` seen (negative when the bound holds with room).
    pub bound_max_excess: f64,
    /// Largest `|s|` seen on `|x| ≥ 0.9L`.
    pub truncation_max: f64,
    pub truncation_floor: f64,
    pub contraction: f64,
    /// Largest `|v_c_inst − recomputed|` at output times.
    pub velocity_consistency: f64,
}

impl RunStats {
    pub fn mass_law_ok(&self) -> bool {
        self.mass_law_max_err <= MASS_LAW_TOL
    }

    pub fn bound_ok(&self) -> bool {
        self.bound_max_excess <= BOUND_SLACK
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub stats: RunStats,
    pub final_state: SimState,
}

/// Observer called at every output time with the current state.
pub type Observer<'a> = dyn FnMut(&Stepper, &SimState) + 'a;

/// Runs `state` to `opts.t_final`, recording the trajectory and checking
/// the mass law and the a-priori bound at every output time.
pub fn simulate(stepper: &Stepper, state: SimState, opts: &RunOptions) -> Result<RunOutput> {
    simulate_observed(stepper, state, opts, &mut |_, _| {})
}

pub fn simulate_observed(
    stepper: &Stepper,
    mut state: SimState,
    opts: &RunOptions,
    observer: &mut Observer<'_>,
) -> Result<RunOutput> {
    let dt = stepper.cfg.dt;
    let contraction = stepper.contraction_estimate(&state.field);
    if contraction * dt * dt >= CONTRACTION_LIMIT {
        return Err(Error::StepTooLarge { estimate: contraction * dt * dt });
    }
    let model = &stepper.model;
    let k = opts.bound_order.min(model.kernel.smoothness_order());
    let g_norms = model.kernel.wkinf_norms(k);
    let s0_norms = state.field.wkinf_norms(k);
    let t0 = state.t;
    let mass0 = state.field.total();
    let n_steps = ((opts.t_final - t0) / dt).round().max(0.0) as usize;
    let stride = opts.output_stride.max(1);
    let mut snapshots_due: Vec<f64> = opts.snapshot_times.iter().copied().filter(|&t| t >= t0).collect();
    snapshots_due.sort_by(f64::total_cmp);
    snapshots_due.reverse();

    let mut traj = Trajectory::default();
    let ringing = 10.0 * stepper.stationary_field(0.0).boundary_max();
    let mut stats = RunStats {
        contraction,
        bound_max_excess: f64::NEG_INFINITY,
        truncation_floor: opts.truncation_floor.max(ringing),
        ..RunStats::default()
    };

    let record = |state: &SimState, traj: &mut Trajectory, stats: &mut RunStats| {
        let samples = state.field.samples();
        let grad = stepper.grid.derivative_samples(&state.field.coeffs, 1);
        let norm_inf = samples.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let grad_inf = grad.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let s_tot = state.field.total();
        let law = model.total_deformation(state.t - t0, mass0);
        stats.mass_law_max_err = stats.mass_law_max_err.max((s_tot - law).abs() / (1.0 + mass0.abs()));
        let e = (-(state.t - t0) / model.alpha).exp();
        let norms = state.field.wkinf_norms(k);
        for m in 0..=k {
            let bound = e * s0_norms[m] + (1.0 - e) * model.alpha * model.gamma * g_norms[m];
            stats.bound_max_excess = stats.bound_max_excess.max(norms[m] - bound);
        }
        stats.truncation_max = stats.truncation_max.max(state.field.boundary_max());
        let recomputed = stepper.velocity(&state.field.coeffs, state.x_c, state.v_c_inst);
        stats.velocity_consistency = stats.velocity_consistency.max((recomputed - state.v_c_inst).abs());
        traj.samples.push(TrajectorySample {
            t: state.t,
            x_c: state.lab_position(),
            v_c: state.v_c_inst,
            s_tot,
            norm_inf,
            grad_inf,
        });
    };

    let snapshot = |state: &SimState| Snapshot {
        t: state.t,
        x: stepper.grid.points().iter().map(|x| x + state.offset).collect(),
        s: state.field.samples(),
    };

    record(&state, &mut traj, &mut stats);
    observer(stepper, &state);
    while snapshots_due.last().is_some_and(|&ts| ts <= state.t + 0.5 * dt) {
        snapshots_due.pop();
        traj.snapshots.push(snapshot(&state));
    }
    for i in 1..=n_steps {
        let (mut next, st) = stepper.step(&state)?;
        next.t = t0 + i as f64 * dt;
        stats.steps += 1;
        stats.max_picard_iters = stats.max_picard_iters.max(st.iters);
        stepper.recenter(&mut next);
        state = next;
        if i % stride == 0 || i == n_steps {
            record(&state, &mut traj, &mut stats);
            observer(stepper, &state);
        }
        while snapshots_due.last().is_some_and(|&ts| ts <= state.t + 0.5 * dt) {
            snapshots_due.pop();
            traj.snapshots.push(snapshot(&state));
        }
    }
    if stats.truncation_max > stats.truncation_floor {
        log::warn!(
            "field reaches {:.3e} near the box edge; consider a larger half_width",
            stats.truncation_max
        );
    }
    Ok(RunOutput { trajectory: traj, stats, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::kernel::SourceKernel;
    use crate::model::ModelParams;

    fn setup(eta: f64, eps: f64, l: f64, n: usize, dt: f64) -> Stepper {
        let model = ModelParams::rescaled_units(eta, eps).unwrap().model().unwrap();
        let grid = Arc::new(SpectralGrid::new(l, n).unwrap());
        Stepper::new(model, grid, StepConfig { dt, ..StepConfig::default() }).unwrap()
    }

    #[test]
    fn phi1_series_matches_direct_form() {
        for z in [Complex64::new(0.09, 0.0), Complex64::new(0.05, -0.07), Complex64::new(1e-6, 2e-6)] {
            let direct = (Complex64::new(1.0, 0.0) - (-z).exp()) / z;
            assert!((phi1(z) - direct).norm() < 1e-10 * direct.norm().max(1.0), "{z}");
        }
        assert!((phi1(Complex64::new(0.0, 0.0)) - 1.0).norm() < 1e-16);
    }

    #[test]
    fn source_free_field_decays_by_heat_multiplier() {
        let model = Model::reduced(2.0, SourceKernel::zero()).unwrap();
        let grid = Arc::new(SpectralGrid::new(20.0, 256).unwrap());
        let st = Stepper::new(model, grid.clone(), StepConfig::default()).unwrap();
        let f = Field::from_fn(grid, |x| (-x * x).exp());
        let out = st.propagate_field(&f, 0.5, 0.0, 0.3);
        assert!((out.total() - f.total() * (-0.5f64).exp()).abs() < 1e-14);
        // heat flow of e^{−x²} for time 0.5: e^{−x²/3}/√3, then damping
        let expect = (-0.5f64).exp() / 3f64.sqrt();
        assert!((out.value_at(0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn stationary_state_is_a_fixed_point() {
        let st = setup(3.0, 0.05, 20.0, 256, 1e-2);
        let f = st.stationary_field(0.7);
        let out = st.propagate_field(&f, 1.0, 0.7, 0.7);
        let diff = out.sub(&f).wkinf_norms(0)[0];
        assert!(diff < 1e-13, "{diff}");
        let s = st.state(f, 0.7).unwrap();
        assert!(s.v_c_inst.abs() < 1e-12);
    }

    #[test]
    fn exact_source_integral_for_moving_source() {
        // reference: the same mode equation integrated with many small steps
        let st = setup(1.0, 0.3, 10.0, 64, 1e-3);
        let f0 = st.stationary_field(0.0);
        let one = st.propagate(&f0.coeffs, 0.2, 0.0, 0.5);
        let mut c = f0.coeffs.clone();
        let n = 2000;
        for i in 0..n {
            let a = 0.5 * i as f64 / n as f64;
            let b = 0.5 * (i + 1) as f64 / n as f64;
            c = st.propagate(&c, 0.2 / n as f64, a, b);
        }
        for j in 0..one.len() {
            assert!((one[j] - c[j]).norm() < 1e-12, "mode {j}");
        }
    }

    #[test]
    fn zero_stiffness_freezes_position() {
        let st = setup(0.0, 0.1, 20.0, 256, 1e-2);
        let f = st.stationary_field(0.5);
        let s = st.state(f, 0.0).unwrap();
        let out = simulate(&st, s, &RunOptions { t_final: 1.0, output_stride: 10, ..RunOptions::default() }).unwrap();
        assert!(out.trajectory.samples.iter().all(|p| p.x_c == 0.0));
        assert!(out.stats.mass_law_ok());
    }

    #[test]
    fn symmetric_data_keeps_position() {
        let st = setup(6.0, 0.05, 20.0, 256, 1e-2);
        let s = st.state(st.stationary_field(0.0).scaled(0.3), 0.0).unwrap();
        let out = simulate(&st, s, &RunOptions { t_final: 2.0, output_stride: 10, ..RunOptions::default() }).unwrap();
        assert!(out.trajectory.samples.iter().all(|p| p.x_c.abs() < 1e-10));
    }

    #[test]
    fn discrete_pulse_travels_at_grid_speed() {
        let st = setup(5.0, 0.05, 20.0, 512, 1e-2);
        let v = st.grid_pulse_speed().unwrap().unwrap();
        let s = st.state(st.pulse_field(0.0, v), 0.0).unwrap();
        assert!((s.v_c_inst - v).abs() < 1e-10);
        let out = simulate(&st, s, &RunOptions { t_final: 1.0, output_stride: 10, ..RunOptions::default() }).unwrap();
        let x = out.final_state.lab_position();
        assert!((x - v).abs() < 1e-9, "{x} vs {v}");
        // and the grid speed is close to the continuous one
        let exact = analytic::pulse_velocity(&st.model).unwrap().speed();
        assert!((v - exact).abs() < 1e-3 * exact, "{v} vs {exact}");
    }

    #[test]
    fn subgrid_closure_restores_speed_of_narrow_source() {
        let model = ModelParams::rescaled_units(5.0, 1e-3).unwrap().model().unwrap();
        let grid = Arc::new(SpectralGrid::new(40.0, 1024).unwrap());
        let exact = analytic::pulse_velocity(&model).unwrap().speed();
        let with = Stepper::new(model.clone(), grid.clone(), StepConfig::default()).unwrap();
        let v = with.grid_pulse_speed().unwrap().unwrap();
        assert!((v - exact).abs() < 1e-4 * exact, "{v} vs {exact}");
        let cfg = StepConfig { subgrid_tail: false, ..StepConfig::default() };
        let without = Stepper::new(model, grid, cfg).unwrap();
        let v0 = without.grid_pulse_speed().unwrap().unwrap();
        assert!((v0 - exact).abs() > 1e-2 * exact);
    }

    #[test]
    fn recentering_keeps_lab_position() {
        let st = setup(5.0, 0.05, 10.0, 256, 1e-2);
        let v = st.grid_pulse_speed().unwrap().unwrap();
        let mut s = st.state(st.pulse_field(6.0, v), 6.0).unwrap();
        let before = s.field.value_at(6.0).unwrap();
        st.recenter(&mut s);
        assert!(s.x_c.abs() <= st.grid.dx());
        assert!((s.lab_position() - 6.0).abs() < 1e-12);
        assert!((s.field.value_at(s.x_c).unwrap() - before).abs() < 1e-12);
        let mut z = st.state(st.pulse_field(0.0, v), 0.0).unwrap();
        let copy = z.clone();
        st.recenter(&mut z);
        assert_eq!(z, copy);
    }

    #[test]
    fn reflection_equivariance() {
        let st = setup(3.0, 0.1, 20.0, 256, 1e-2);
        let s = st.state(st.stationary_field(0.4), 0.0).unwrap();
        let r = s.reflected();
        let opts = RunOptions { t_final: 3.0, output_stride: 10, ..RunOptions::default() };
        let a = simulate(&st, s, &opts).unwrap();
        let b = simulate(&st, r, &opts).unwrap();
        assert!(a.trajectory.samples.last().unwrap().x_c.abs() > 1e-3);
        for (p, q) in a.trajectory.samples.iter().zip(&b.trajectory.samples) {
            assert!((p.x_c + q.x_c).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_law_and_bound_from_cold_start() {
        let st = setup(5.0, 0.2, 20.0, 256, 1e-2);
        let s = st.state(Field::zeros(st.grid.clone()), 0.0).unwrap();
        let out = simulate(&st, s, &RunOptions { t_final: 3.0, output_stride: 5, ..RunOptions::default() }).unwrap();
        assert!(out.stats.mass_law_max_err < 1e-12, "{}", out.stats.mass_law_max_err);
        assert!(out.stats.bound_ok(), "{}", out.stats.bound_max_excess);
        assert!(out.stats.velocity_consistency < 1e-12);
    }

    #[test]
    fn step_size_convergence() {
        let run = |dt: f64| {
            let st = setup(6.0, 0.1, 20.0, 256, dt);
            let s = st.state(st.stationary_field(0.3), 0.0).unwrap();
            let out = simulate(&st, s, &RunOptions { t_final: 2.0, output_stride: 1_000_000, ..RunOptions::default() });
            out.unwrap().final_state.lab_position()
        };
        let reference = run(0.1 / 64.0);
        let e1 = (run(0.1 / 8.0) - reference).abs();
        let e2 = (run(0.1 / 16.0) - reference).abs();
        assert!(e2 <= e1 / 3.5, "{e1} {e2}");
    }

    #[test]
    fn oversized_step_is_refused() {
        let st = setup(5.0, 0.05, 20.0, 256, 1.0);
        let s = st.state(st.stationary_field(0.0), 0.0).unwrap();
        let err = simulate(&st, s, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn barycentric_gradient_option() {
        let model = ModelParams::rescaled_units(5.0, 0.3).unwrap().model().unwrap();
        let grid = Arc::new(SpectralGrid::new(20.0, 512).unwrap());
        let cfg = StepConfig { gradient: GradientMethod::Barycentric { order: 6 }, ..StepConfig::default() };
        let st = Stepper::new(model, grid, cfg).unwrap();
        let f = st.stationary_field(0.1234);
        let x = 0.9;
        let spectral = st.grid.eval_derivative(&f.coeffs, x);
        assert!((st.gradient(&f.coeffs, x) - spectral).abs() < 1e-6);
    }
}
