use std::sync::Arc;

use pulselab::dynamics::{RunOptions, StepConfig, Stepper};
use pulselab::experiments::{
    bifurcation_sweep, pulse_stability_run, stationary_stability_run, PerturbationShape, PerturbationSpec,
    StationaryStart, SweepSetup,
};
use pulselab::model::ModelParams;
use pulselab::spectral::SpectralGrid;

fn stepper(eta: f64, n: usize, l: f64, dt: f64) -> Stepper {
    let model = ModelParams::rescaled_units(eta, 1e-3).unwrap().model().unwrap();
    Stepper::new(model, Arc::new(SpectralGrid::new(l, n).unwrap()), StepConfig { dt, ..StepConfig::default() })
        .unwrap()
}

#[test]
fn shifted_starts_settle_on_a_translate() {
    let st = stepper(0.05, 512, 30.0, 5e-3);
    let opts = RunOptions { t_final: 20.0, output_stride: 20, ..RunOptions::default() };
    for a in [0.1, 0.3, 1.0] {
        let r = stationary_stability_run(&st, StationaryStart::Shifted { shift: a }, &opts).unwrap();
        assert!(r.settled);
        assert!(r.final_residual_w1 < 1e-4, "a = {a}: {}", r.final_residual_w1);
        // the cluster slides down the gradient, away from the profile's peak
        assert!(r.x_bar < 0.0 && r.x_bar > -a, "a = {a}: x̄ = {}", r.x_bar);
        assert!(r.fit.conclusive && r.fit.delta >= 0.5, "a = {a}: {:?}", r.fit);
    }
}

#[test]
fn frozen_cluster_relaxes_at_unit_rate() {
    let st = stepper(0.0, 512, 30.0, 1e-2);
    let opts = RunOptions { t_final: 20.0, output_stride: 10, ..RunOptions::default() };
    let r = stationary_stability_run(&st, StationaryStart::Cold, &opts).unwrap();
    assert_eq!(r.x_bar, 0.0);
    assert!(r.fit.delta >= 0.9 && r.fit.delta <= 1.05, "{}", r.fit.delta);
}

#[test]
fn shift_perturbation_moves_the_phase() {
    let st = stepper(5.0, 512, 30.0, 2e-3);
    let h = 0.01;
    let pert = PerturbationSpec { shape: PerturbationShape::Shift, amplitude: h, ..PerturbationSpec::default() };
    let opts = RunOptions { t_final: 12.0, output_stride: 50, ..RunOptions::default() };
    let r = pulse_stability_run(&st, &pert, &opts, 0).unwrap();
    // The perturbation is absorbed as a constant phase. The cluster starts
    // behind its field and, at a source this sharp, initially slows down, so
    // the phase settles below zero rather than near h.
    let late: Vec<f64> = r.series.iter().rev().take(20).map(|p| p.x_c - r.v_grid * p.t).collect();
    let spread = late.iter().fold(f64::NEG_INFINITY, |m: f64, x| m.max(*x))
        - late.iter().fold(f64::INFINITY, |m: f64, x| m.min(*x));
    assert!(spread < 1e-8, "{spread}");
    assert!(r.final_phase.abs() < 5.0 * h, "{}", r.final_phase);
    assert!(r.series.last().unwrap().z_inf < 1e-6);
}

#[test]
fn gaussian_bump_decays_near_unit_rate() {
    let st = stepper(5.0, 512, 30.0, 2e-3);
    let opts = RunOptions { t_final: 15.0, output_stride: 50, ..RunOptions::default() };
    let r = pulse_stability_run(&st, &PerturbationSpec::default(), &opts, 0).unwrap();
    let z = r.z_fit.unwrap();
    assert!(z.conclusive);
    assert!(z.delta > 0.5 && z.delta <= 1.1, "{}", z.delta);
    // |ẏ| samples the perturbation at the cluster and decays faster than ‖z‖∞
    let y = r.y_dot_fit.unwrap();
    assert!(y.delta > z.delta, "{} vs {}", y.delta, z.delta);
}

#[test]
fn sweep_examples() {
    let setup = SweepSetup {
        half_width: 30.0,
        n_points: 512,
        step: StepConfig { dt: 5e-3, ..StepConfig::default() },
        t_final: 40.0,
        output_stride: 20,
        kick: 1e-3,
    };
    let base = ModelParams::rescaled_units(1.0, 1e-3).unwrap().model().unwrap();
    let points = bifurcation_sweep(&base, &setup, &[5.0, 2.0, 4.0 * 2f64.sqrt()]).unwrap();
    assert_eq!(points.iter().map(|p| p.eta).collect::<Vec<_>>(), vec![2.0, 5.0, 4.0 * 2f64.sqrt()]);
    assert!(points[0].below_threshold && points[0].v_measured.unwrap() <= 1e-3);
    assert!((points[1].v_measured.unwrap() - 1.5).abs() <= 0.02);
    assert!((points[2].v_measured.unwrap() - 2.0).abs() <= 0.02);
    assert!(points.iter().all(|p| p.agrees() == Some(true)));
}
