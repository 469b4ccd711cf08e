//! Scripted studies: stability of pulses and of the stationary state, the
//! bifurcation diagram `v_c(η)`, and the exponential-rate fits they report.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, PulseOutcome};
use crate::dynamics::{simulate_observed, RunOptions, RunStats, SimState, StepConfig, Stepper};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{Field, SpectralGrid};
use crate::trajectory::Trajectory;

/// Values at or below this are dropped before fitting.
pub const DEFAULT_CLIP_FLOOR: f64 = 1e-14;
/// Minimum number of points for a fit to count.
pub const MIN_FIT_POINTS: usize = 8;
/// Minimum `R²` for a fit to count as conclusive.
pub const MIN_R_SQUARED: f64 = 0.98;
/// Fraction of the run, counted from the end, used for fits.
pub const FIT_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub delta: f64,
    pub prefactor: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub conclusive: bool,
}

impl DecayFit {
    fn inconclusive(window: (f64, f64), n_points: usize) -> Self {
        Self {
            delta: f64::NAN,
            prefactor: f64::NAN,
            t_start: window.0,
            t_end: window.1,
            r_squared: f64::NAN,
            n_points,
            conclusive: false,
        }
    }
}

/// The last [`FIT_FRACTION`] of `[0, t_final]`.
pub fn default_window(t_final: f64) -> (f64, f64) {
    ((1.0 - FIT_FRACTION) * t_final, t_final)
}

/// Least-squares fit of `ln value = ln C − δ t` over samples in `window`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> DecayFit {
    fit_decay_with_floor(series, window, DEFAULT_CLIP_FLOOR)
}

/// [`fit_decay`] dropping values `≤ floor`.
pub fn fit_decay_with_floor(series: &[(f64, f64)], window: (f64, f64), floor: f64) -> DecayFit {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *t >= window.0 && *t <= window.1 && *v > floor && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return DecayFit::inconclusive(window, pts.len());
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return DecayFit::inconclusive(window, pts.len());
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // Rounding in the mean leaves a constant series with a tiny nonzero SS_tot.
    let flat = ss_tot <= 1e-24 * n * my.abs().max(1.0).powi(2);
    let r_squared = if flat { 1.0 } else { 1.0 - ss_res / ss_tot };
    DecayFit {
        delta: -slope,
        prefactor: intercept.exp(),
        t_start: window.0,
        t_end: window.1,
        r_squared,
        n_points: pts.len(),
        conclusive: r_squared >= MIN_R_SQUARED,
    }
}

/// Level below which roundoff dominates a quantity of natural size `scale`.
pub fn roundoff_floor(scale: f64) -> f64 {
    1e4 * f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationShape {
    /// `A e^{−(x−o)²/w²}`.
    GaussianBump,
    /// Odd bump `A √(2e) u e^{−u²}`, `u = (x−o)/w`, with peak `A`.
    GradientBump,
    /// Translation of the base state by `A`.
    Shift,
    /// A few random-phase cosines of period `~w` under a Gaussian envelope,
    /// scaled to peak `A`; phases come from the run seed.
    RandomPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    pub shape: PerturbationShape,
    pub amplitude: f64,
    pub width: f64,
    pub offset: f64,
    /// Largest admissible amplitude.
    pub budget: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { shape: PerturbationShape::GaussianBump, amplitude: 0.01, width: 1.0, offset: 0.0, budget: 0.05 }
    }
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self { amplitude: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::require_positive("perturbation.width", self.width, "width > 0")?;
        if self.amplitude.is_nan() || self.amplitude.abs() > self.budget {
            return Err(Error::Domain {
                name: "perturbation.amplitude",
                value: self.amplitude,
                constraint: "|amplitude| <= budget",
            });
        }
        Ok(())
    }

    /// The perturbation `z₀` added to the base state `base(center)`.
    pub fn field<B>(&self, grid: &Arc<SpectralGrid>, base: B, center: f64, seed: u64) -> Field
    where
        B: Fn(f64) -> Field,
    {
        let (a, w, o) = (self.amplitude, self.width, center + self.offset);
        match self.shape {
            PerturbationShape::GaussianBump => Field::from_fn(grid.clone(), |x| a * (-((x - o) / w).powi(2)).exp()),
            PerturbationShape::GradientBump => {
                let k = (2.0 * std::f64::consts::E).sqrt();
                Field::from_fn(grid.clone(), |x| {
                    let u = (x - o) / w;
                    a * k * u * (-u * u).exp()
                })
            }
            PerturbationShape::Shift => base(center + a).sub(&base(center)),
            PerturbationShape::RandomPhases => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let terms: Vec<(f64, f64)> = (1..=4)
                    .map(|k| (k as f64 / w, rng.random_range(0.0..std::f64::consts::TAU)))
                    .collect();
                let shape = |x: f64| {
                    let u = (x - o) / w;
                    (-0.25 * u * u).exp() * terms.iter().map(|(f, p)| (f * (x - o) + p).cos()).sum::<f64>()
                };
                let peak = grid.points().iter().fold(0.0, |m: f64, &x| m.max(shape(x).abs()));
                let scale = if peak > 0.0 { a / peak } else { 0.0 };
                Field::from_fn(grid.clone(), |x| scale * shape(x))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseStabilitySample {
    pub t: f64,
    pub x_c: f64,
    /// `‖s − S̄(· − x_c)‖_∞`.
    pub z_inf: f64,
    /// `|v_c − ẋ_c|`.
    pub y_dot: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PulseStabilityReport {
    pub v_grid: f64,
    pub series: Vec<PulseStabilitySample>,
    /// `None` for a zero perturbation.
    pub z_fit: Option<DecayFit>,
    pub y_dot_fit: Option<DecayFit>,
    /// `x_c(T) − v T`.
    pub final_phase: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

/// Perturbs the discrete pulse and tracks how the perturbation decays.
pub fn pulse_stability_run(
    stepper: &Stepper,
    perturbation: &PerturbationSpec,
    opts: &RunOptions,
    seed: u64,
) -> Result<PulseStabilityReport> {
    perturbation.validate()?;
    let v = stepper.grid_pulse_speed()?.ok_or(Error::Domain {
        name: "eta",
        value: stepper.model.eta,
        constraint: "eta above the pulse threshold",
    })?;
    let base = |c: f64| stepper.pulse_field(c, v);
    let z0 = perturbation.field(&stepper.grid, base, 0.0, seed);
    let state = stepper.state(base(0.0).add(&z0), 0.0)?;
    let mut series = Vec::new();
    let mut observe = |st: &Stepper, s: &SimState| {
        let z = s.field.sub(&st.pulse_field(s.x_c, v));
        let z_inf = z.samples().iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        series.push(PulseStabilitySample { t: s.t, x_c: s.lab_position(), z_inf, y_dot: (v - s.v_c_inst).abs() });
    };
    let out = simulate_observed(stepper, state, opts, &mut observe)?;
    let window = default_window(opts.t_final);
    let (z_fit, y_dot_fit) = if perturbation.amplitude == 0.0 {
        (None, None)
    } else {
        let norms = stepper.pulse_field(0.0, v).wkinf_norms(1);
        let zs: Vec<(f64, f64)> = series.iter().map(|p| (p.t, p.z_inf)).collect();
        let ys: Vec<(f64, f64)> = series.iter().map(|p| (p.t, p.y_dot)).collect();
        (
            Some(fit_decay_with_floor(&zs, window, roundoff_floor(norms[0]))),
            Some(fit_decay_with_floor(&ys, window, roundoff_floor(stepper.model.eta * norms[1]))),
        )
    };
    let last = out.final_state.lab_position();
    Ok(PulseStabilityReport {
        v_grid: v,
        series,
        z_fit,
        y_dot_fit,
        final_phase: last - v * (out.final_state.t),
        trajectory: out.trajectory,
        stats: out.stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum StationaryStart {
    /// `s₀ = 0`, cluster at the origin.
    Cold,
    /// `s₀ = S̄₀(· − shift)`, cluster at the origin.
    Shifted { shift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarySample {
    pub t: f64,
    pub x_c: f64,
    pub v_c: f64,
    /// `‖s − S̄₀(· − x̄)‖_{W^{1,∞}}` with the final `x̄`.
    pub residual_w1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryStabilityReport {
    pub x_bar: f64,
    /// `|ẋ_c(T)| < 1e-8`.
    pub settled: bool,
    pub series: Vec<StationarySample>,
    pub fit: DecayFit,
    pub final_residual_w1: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub stats: RunStats,
}

/// Velocity below which the cluster counts as settled.
pub const SETTLED_SPEED: f64 = 1e-8;

/// Runs from `start` and measures convergence to a re-centered stationary
/// state `S̄₀(· − x̄)`, `x̄ = x_c(T)`.
pub fn stationary_stability_run(
    stepper: &Stepper,
    start: StationaryStart,
    opts: &RunOptions,
) -> Result<StationaryStabilityReport> {
    let field = match start {
        StationaryStart::Cold => Field::zeros(stepper.grid.clone()),
        StationaryStart::Shifted { shift } => stepper.stationary_field(shift),
    };
    let state = stepper.state(field, 0.0)?;
    let mut stored: Vec<(f64, f64, f64, f64, Vec<Complex64>)> = Vec::new();
    let mut observe = |_: &Stepper, s: &SimState| {
        stored.push((s.t, s.lab_position(), s.v_c_inst, s.offset, s.field.coeffs.clone()));
    };
    let out = simulate_observed(stepper, state, opts, &mut observe)?;
    let x_bar = out.final_state.lab_position();
    let settled = out.final_state.v_c_inst.abs() < SETTLED_SPEED;
    if !settled {
        log::warn!(
            "cluster still moving at T = {} (|v| = {:.3e}); extend the run for a reliable x̄",
            out.final_state.t,
            out.final_state.v_c_inst.abs()
        );
    }
    let series: Vec<StationarySample> = stored
        .into_iter()
        .map(|(t, x_c, v_c, offset, coeffs)| {
            let field = Field { grid: stepper.grid.clone(), coeffs };
            let r = field.sub(&stepper.stationary_field(x_bar - offset));
            let n = r.wkinf_norms(1);
            StationarySample { t, x_c, v_c, residual_w1: n[0] + n[1] }
        })
        .collect();
    let scale: f64 = stepper.stationary_field(0.0).wkinf_norms(1).iter().sum();
    let pts: Vec<(f64, f64)> = series.iter().map(|p| (p.t, p.residual_w1)).collect();
    let fit = fit_decay_with_floor(&pts, default_window(opts.t_final), roundoff_floor(scale));
    Ok(StationaryStabilityReport {
        x_bar,
        settled,
        final_residual_w1: series.last().map_or(f64::NAN, |p| p.residual_w1),
        series,
        fit,
        trajectory: out.trajectory,
        stats: out.stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationPoint {
    pub eta: f64,
    pub eta_star: f64,
    /// `|slope|` of `x_c` over the fit window; `None` if the run failed.
    pub v_measured: Option<f64>,
    /// Analytic speed, 0 below threshold.
    pub v_predicted: f64,
    pub below_threshold: bool,
    pub error: Option<String>,
    pub stats: Option<RunStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepZone {
    Below,
    Exempt,
    Above,
}

/// Width of the band `|η/η* − 1| ≤ EXEMPT_BAND` where nothing is asserted.
pub const EXEMPT_BAND: f64 = 0.05;
/// Speed counted as zero below threshold.
pub const ZERO_SPEED_TOL: f64 = 1e-3;
/// Relative speed agreement required above threshold.
pub const SPEED_REL_TOL: f64 = 0.02;

impl BifurcationPoint {
    pub fn zone(&self) -> SweepZone {
        if self.eta < self.eta_star * (1.0 - EXEMPT_BAND) {
            SweepZone::Below
        } else if self.eta > self.eta_star * (1.0 + EXEMPT_BAND) {
            SweepZone::Above
        } else {
            SweepZone::Exempt
        }
    }

    /// Whether the point satisfies the dichotomy; `None` in the exempt band.
    pub fn agrees(&self) -> Option<bool> {
        let v = self.v_measured?;
        match self.zone() {
            SweepZone::Below => Some(v <= ZERO_SPEED_TOL),
            SweepZone::Above => Some((v - self.v_predicted).abs() <= SPEED_REL_TOL * self.v_predicted),
            SweepZone::Exempt => None,
        }
    }

    pub const CSV_HEADER: &'static str = "eta,eta_star,v_measured,v_predicted,below_threshold,zone,agrees,error";

    pub fn csv_row(&self) -> String {
        let v = self.v_measured.map_or_else(|| "nan".to_string(), |v| format!("{v:.16e}"));
        let zone = match self.zone() {
            SweepZone::Below => "below",
            SweepZone::Exempt => "exempt",
            SweepZone::Above => "above",
        };
        let agrees = self.agrees().map_or_else(|| "na".to_string(), |a| a.to_string());
        format!(
            "{:.16e},{:.16e},{},{:.16e},{},{},{},{}",
            self.eta,
            self.eta_star,
            v,
            self.v_predicted,
            self.below_threshold,
            zone,
            agrees,
            self.error.as_deref().unwrap_or("").replace(',', ";")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSetup {
    pub half_width: f64,
    pub n_points: usize,
    pub step: StepConfig,
    pub t_final: f64,
    pub output_stride: usize,
    /// Peak of the odd symmetry-breaking kick.
    pub kick: f64,
}

/// For each `η`: the analytic prediction and a simulation from the
/// stationary state plus a small odd kick. Points run in parallel and are
/// returned in `η` order.
pub fn bifurcation_sweep(base: &Model, setup: &SweepSetup, etas: &[f64]) -> Result<Vec<BifurcationPoint>> {
    let eta_star = analytic::critical_stiffness(base)?.eta_star;
    let grid = Arc::new(SpectralGrid::new(setup.half_width, setup.n_points)?);
    let mut points: Vec<BifurcationPoint> = etas
        .par_iter()
        .map(|&eta| {
            let model = base.with_eta(eta);
            let (v_predicted, below) = match analytic::pulse_velocity(&model) {
                Ok(PulseOutcome::Pulse(p)) => (p.v_c, false),
                Ok(PulseOutcome::BelowThreshold { .. }) => (0.0, true),
                Err(e) => {
                    return BifurcationPoint {
                        eta,
                        eta_star,
                        v_measured: None,
                        v_predicted: f64::NAN,
                        below_threshold: eta <= eta_star,
                        error: Some(e.to_string()),
                        stats: None,
                    }
                }
            };
            let (v_measured, stats, error) = match sweep_point(&model, &grid, setup) {
                Ok((v, stats)) => (Some(v), Some(stats), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            BifurcationPoint { eta, eta_star, v_measured, v_predicted, below_threshold: below, error, stats }
        })
        .collect();
    points.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    Ok(points)
}

fn sweep_point(model: &Model, grid: &Arc<SpectralGrid>, setup: &SweepSetup) -> Result<(f64, RunStats)> {
    let stepper = Stepper::new(model.clone(), grid.clone(), setup.step)?;
    let kick = PerturbationSpec {
        shape: PerturbationShape::GradientBump,
        amplitude: setup.kick,
        budget: setup.kick.abs(),
        ..PerturbationSpec::default()
    };
    let base = stepper.stationary_field(0.0);
    let z = kick.field(grid, |c| stepper.stationary_field(c), 0.0, 0);
    let state = stepper.state(base.add(&z), 0.0)?;
    let opts = RunOptions { t_final: setup.t_final, output_stride: setup.output_stride, ..RunOptions::default() };
    let out = crate::dynamics::simulate(&stepper, state, &opts)?;
    let (t0, t1) = default_window(setup.t_final);
    let v = out
        .trajectory
        .position_slope(t0, t1)
        .map(f64::abs)
        .ok_or_else(|| Error::Fit("too few trajectory samples in the fit window".into()))?;
    Ok((v, out.stats))
}
