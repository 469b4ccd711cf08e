use std::sync::Arc;

use proptest::prelude::*;

use pulselab::analytic::{self, PulseOutcome};
use pulselab::dynamics::{simulate, RunOptions, StepConfig, Stepper};
use pulselab::experiments::fit_decay;
use pulselab::model::{rescale, rescale_trajectory, unscale_trajectory, ModelParams};
use pulselab::spectral::{Field, SpectralGrid};
use pulselab::trajectory::{Trajectory, TrajectorySample};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decay_fit_recovers_rate(delta in 0.05f64..3.0, c in 1e-3f64..1e3) {
        let s: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = 0.1 * i as f64;
            (t, c * (-delta * t).exp())
        }).collect();
        let f = fit_decay(&s, (0.0, 4.0));
        prop_assert!((f.delta - delta).abs() < 1e-9);
        prop_assert!((f.prefactor / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unscale_inverts_rescale(
        alpha in 0.2f64..5.0, beta in 0.2f64..5.0, gamma in 0.1f64..3.0,
        t in 0.0f64..10.0, x in -5.0f64..5.0, s in 0.0f64..2.0,
    ) {
        let p = ModelParams::new(alpha, beta, gamma, 1.0, 1e-2).unwrap();
        let (_, e) = rescale(&p).unwrap();
        let traj = Trajectory {
            samples: vec![TrajectorySample { t, x_c: x, v_c: x, s_tot: s, norm_inf: s, grad_inf: s }],
            snapshots: vec![],
        };
        let back = rescale_trajectory(&unscale_trajectory(&traj, &e), &e);
        let (a, b) = (&traj.samples[0], &back.samples[0]);
        for (u, v) in [(a.t, b.t), (a.x_c, b.x_c), (a.v_c, b.v_c), (a.s_tot, b.s_tot), (a.grad_inf, b.grad_inf)] {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn threshold_scales_like_beta_cubed(beta in 0.3f64..4.0, alpha in 0.5f64..2.0, gamma in 0.5f64..2.0) {
        // At fixed εβ⁻¹ the threshold is exactly 4β³/(α²γ) times the reduced one.
        let m = ModelParams::new(alpha, beta, gamma, 1.0, 1e-2 * beta).unwrap().model().unwrap();
        let r = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1e-2).unwrap().model().unwrap();
        let full = analytic::critical_stiffness(&m).unwrap().eta_star;
        let unit = analytic::critical_stiffness(&r).unwrap().eta_star;
        let ratio = full / (unit * beta.powi(3) / (alpha * alpha * gamma));
        prop_assert!((ratio - 1.0).abs() < 1e-8, "{}", ratio);
    }

    #[test]
    fn pulse_profile_mirror_symmetry(eta in 4.5f64..8.0, w in -4.0f64..4.0) {
        let m = ModelParams::rescaled_units(eta, 1e-2).unwrap().model().unwrap();
        let PulseOutcome::Pulse(p) = analytic::pulse_velocity(&m).unwrap() else {
            return Err(TestCaseError::fail("expected a pulse"));
        };
        let q = p.reflected();
        prop_assert!((p.value(w).unwrap() - q.value(-w).unwrap()).abs() < 1e-10);
        prop_assert!((p.v_c + q.v_c).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mass_law_and_bound_hold(amp in 0.0f64..2.0, center in -3.0f64..3.0, eta in 0.0f64..6.0) {
        let model = ModelParams::rescaled_units(eta, 0.05).unwrap().model().unwrap();
        let grid = Arc::new(SpectralGrid::new(20.0, 128).unwrap());
        let st = Stepper::new(model, grid.clone(), StepConfig { dt: 1e-2, ..StepConfig::default() }).unwrap();
        let s0 = Field::from_fn(grid, |x| amp * (-(x - center) * (x - center)).exp());
        let out = simulate(&st, st.state(s0, 0.0).unwrap(), &RunOptions { t_final: 2.0, output_stride: 20, ..RunOptions::default() }).unwrap();
        prop_assert!(out.stats.mass_law_ok(), "{}", out.stats.mass_law_max_err);
        prop_assert!(out.stats.bound_ok(), "{}", out.stats.bound_max_excess);
    }
}
