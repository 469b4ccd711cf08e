//! Command-line front end: argument parsing, subcommand dispatch and
//! artifact writing. Every run writes CSV files plus `manifest.json` into the
//! output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::analytic::{self, PulseOutcome};
use crate::config::{parse_config, ExperimentKind, InitialCondition, Manifest, RunConfig, StabilityTarget};
use crate::dynamics::{simulate, RunOptions, RunStats, Stepper};
use crate::error::{Error, Result};
use crate::experiments::{self, DecayFit, StationaryStart, SweepSetup};
use crate::oracle::{self, OracleReport};
use crate::spectral::Field;
use crate::trajectory::Trajectory;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pulselab", version, about = "Self-propelled source on a damped diffusive substrate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults apply to everything omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stationary profile.
    Stationary,
    /// Pulse speed and co-moving profile.
    Pulse,
    /// Critical stiffness over the configured source widths.
    Threshold,
    /// Time integration from the configured initial data.
    Simulate,
    /// Bifurcation sweep over the configured stiffness values.
    Sweep,
    /// Perturbation decay around the pulse or the stationary state.
    Stability,
    /// Oracle cross-checks.
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Pulse => "pulse",
            Command::Threshold => "threshold",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Stability => "stability",
            Command::Oracle => "oracle",
        }
    }
}

impl From<ExperimentKind> for Command {
    fn from(k: ExperimentKind) -> Self {
        match k {
            ExperimentKind::Stationary => Command::Stationary,
            ExperimentKind::Pulse => Command::Pulse,
            ExperimentKind::Threshold => Command::Threshold,
            ExperimentKind::Simulate => Command::Simulate,
            ExperimentKind::Sweep => Command::Sweep,
            ExperimentKind::Stability => Command::Stability,
            ExperimentKind::Oracle => Command::Oracle,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    /// Violated checks; non-empty means exit status 2.
    pub failures: Vec<String>,
    /// Short `key,value` summary echoed to stdout.
    pub summary: Vec<(String, String)>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_ASSERTION
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

struct Out {
    dir: PathBuf,
    report: RunReport,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), report: RunReport::default() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.report.artifacts.push(path);
        Ok(())
    }

    fn finish(mut self, command: Command, cfg: &RunConfig) -> Result<RunReport> {
        let mut manifest = Manifest::new(command.name(), cfg);
        manifest.artifacts = self
            .report
            .artifacts
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        self.write("manifest.json", &manifest.to_json())?;
        Ok(self.report)
    }
}

/// Runs `command` with `cfg`, writing artifacts into `cfg.output_dir`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut out = Out::new(&cfg.output_dir)?;
    match command {
        Command::Stationary => run_stationary(cfg, &mut out)?,
        Command::Pulse => run_pulse(cfg, &mut out)?,
        Command::Threshold => run_threshold(cfg, &mut out)?,
        Command::Simulate => run_simulate(cfg, &mut out)?,
        Command::Sweep => run_sweep(cfg, &mut out)?,
        Command::Stability => run_stability(cfg, &mut out)?,
        Command::Oracle => run_oracle(cfg, &mut out)?,
    }
    let mut summary = String::from("key,value\n");
    for (k, v) in &out.report.summary {
        writeln!(summary, "{k},{v}").unwrap();
    }
    out.write("summary.csv", &summary)?;
    out.finish(command, cfg)
}

/// Entry point used by the binary; returns the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(path) => match parse_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    match run(cli.command, &cfg) {
        Ok(report) => {
            for (k, v) in &report.summary {
                println!("{k},{v}");
            }
            for f in &report.failures {
                eprintln!("check failed: {f}");
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn profile_csv<F>(cfg: &RunConfig, f: F) -> Result<String>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let e = &cfg.experiment;
    let mut csv = String::from("x,s,ds_dx\n");
    for i in 0..e.profile_points {
        let x = -e.profile_half_width + 2.0 * e.profile_half_width * i as f64 / (e.profile_points - 1) as f64;
        let (s, ds) = f(x)?;
        writeln!(csv, "{},{},{}", fmt(x), fmt(s), fmt(ds)).unwrap();
    }
    Ok(csv)
}

fn run_stationary(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let model = cfg.model.model()?;
    let profile = analytic::stationary_profile(&model, 0.0);
    let csv = profile_csv(cfg, |x| Ok((profile.value(x)?, profile.derivative(x)?)))?;
    out.write("profile.csv", &csv)?;
    out.report.note("peak", fmt(profile.value(0.0)?));
    out.report.note("mass", fmt(model.equilibrium_mass()));
    Ok(())
}

fn run_pulse(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let model = cfg.model.model()?;
    match analytic::pulse_velocity(&model)? {
        PulseOutcome::BelowThreshold { eta_star } => {
            out.report.note("eta", fmt(model.eta));
            out.report.note("eta_star", fmt(eta_star));
            out.report.note("below_threshold", true);
            out.report.note("v_c", fmt(0.0));
        }
        PulseOutcome::Pulse(p) => {
            out.report.note("eta", fmt(model.eta));
            out.report.note("eta_star", fmt(p.eta_star));
            out.report.note("below_threshold", false);
            out.report.note("v_c", fmt(p.v_c));
            out.report.note("self_consistency_gap", fmt(p.self_consistency_gap()?));
            let csv = profile_csv(cfg, |w| Ok((p.value(w)?, p.derivative(w)?)))?;
            out.write("profile.csv", &csv)?;
        }
    }
    let mut csv = String::from("key,value\n");
    for (k, v) in &out.report.summary {
        writeln!(csv, "{k},{v}").unwrap();
    }
    out.write("pulse.csv", &csv)
}

fn run_threshold(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let p = cfg.model;
    let eta_star = |eps: f64| -> Result<analytic::ThresholdResult> {
        let params = crate::model::ModelParams { epsilon: eps, ..p };
        analytic::critical_stiffness(&params.model()?)
    };
    let mut csv = String::from("epsilon,eta_star,quadrature_error,kind\n");
    let mut column = Vec::new();
    for &eps in &cfg.experiment.epsilons {
        let r = eta_star(eps)?;
        column.push(r.eta_star);
        writeln!(csv, "{},{},{},computed", fmt(eps), fmt(r.eta_star), fmt(r.quadrature_error)).unwrap();
    }
    if let Some(&eps) = cfg.experiment.epsilons.iter().min_by(|a, b| a.total_cmp(b)) {
        let x = analytic::extrapolate_zero_width(|e| Ok(eta_star(e)?.eta_star), eps, 2.0)?;
        writeln!(csv, "{},{},{},extrapolated", fmt(0.0), fmt(x), fmt(f64::NAN)).unwrap();
        out.report.note("extrapolated", fmt(x));
    }
    let limit = analytic::critical_stiffness_zero_width(p.alpha, p.beta, p.gamma);
    writeln!(csv, "{},{},{},zero_width_limit", fmt(0.0), fmt(limit), fmt(0.0)).unwrap();
    out.report.note("zero_width_limit", fmt(limit));
    out.write("threshold.csv", &csv)
}

fn stepper(cfg: &RunConfig) -> Result<Stepper> {
    let grid = Arc::new(cfg.grid()?);
    Stepper::new(cfg.model.model()?, grid, cfg.step)
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    let e = &cfg.experiment;
    RunOptions {
        t_final: e.t_final,
        output_stride: e.output_stride,
        snapshot_times: e.snapshot_times.clone(),
        ..RunOptions::default()
    }
}

/// Run-level checks whose violation makes the exit status 2.
pub fn stats_failures(stats: &RunStats) -> Vec<String> {
    let mut failures = Vec::new();
    if !stats.mass_law_ok() {
        failures.push(format!("mass law: relative error {:.3e}", stats.mass_law_max_err));
    }
    if !stats.bound_ok() {
        failures.push(format!("a-priori bound exceeded by {:.3e}", stats.bound_max_excess));
    }
    failures
}

fn check_stats(stats: &RunStats, report: &mut RunReport) {
    report.failures.extend(stats_failures(stats));
}

fn write_trajectory(out: &mut Out, traj: &Trajectory, prefix: &str) -> Result<()> {
    out.write(&format!("{prefix}trajectory.csv"), &trajectory_csv(traj))?;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let mut csv = String::from("x,s\n");
        for (x, s) in snap.x.iter().zip(&snap.s) {
            writeln!(csv, "{},{}", fmt(*x), fmt(*s)).unwrap();
        }
        out.write(&format!("{prefix}snapshot_{i:03}.csv"), &csv)?;
    }
    Ok(())
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut csv = String::from("t,x_c,v_c,s_tot,norm_inf,norm_w1\n");
    for s in &traj.samples {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt(s.t),
            fmt(s.x_c),
            fmt(s.v_c),
            fmt(s.s_tot),
            fmt(s.norm_inf),
            fmt(s.norm_w1())
        )
        .unwrap();
    }
    csv
}

fn stats_json(stats: &RunStats) -> String {
    serde_json::to_string_pretty(stats).expect("stats serialize")
}

fn run_simulate(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let st = stepper(cfg)?;
    let x0 = cfg.experiment.x_c0;
    let field: Field = match cfg.experiment.initial {
        InitialCondition::Stationary => st.stationary_field(x0),
        InitialCondition::Cold => Field::zeros(st.grid.clone()),
        InitialCondition::Shifted { shift } => st.stationary_field(x0 + shift),
        InitialCondition::Pulse => {
            let v = st.grid_pulse_speed()?.ok_or(Error::Domain {
                name: "model.eta",
                value: cfg.model.eta,
                constraint: "eta above the pulse threshold for a pulse start",
            })?;
            st.pulse_field(x0, v)
        }
    };
    let state = st.state(field, x0)?;
    let run = simulate(&st, state, &run_options(cfg))?;
    write_trajectory(out, &run.trajectory, "")?;
    out.write("run_stats.json", &stats_json(&run.stats))?;
    if let Some(last) = run.trajectory.last() {
        out.report.note("t_final", fmt(last.t));
        out.report.note("x_c_final", fmt(last.x_c));
        out.report.note("v_c_final", fmt(last.v_c));
    }
    out.report.note("mass_law_max_err", fmt(run.stats.mass_law_max_err));
    check_stats(&run.stats, &mut out.report);
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let e = &cfg.experiment;
    let setup = SweepSetup {
        half_width: cfg.grid.half_width,
        n_points: cfg.grid.n_points,
        step: cfg.step,
        t_final: e.t_final,
        output_stride: e.output_stride,
        kick: e.kick,
    };
    let points = experiments::bifurcation_sweep(&cfg.model.model()?, &setup, &e.etas)?;
    let mut csv = format!("{}\n", experiments::BifurcationPoint::CSV_HEADER);
    for p in &points {
        csv.push_str(&p.csv_row());
        csv.push('\n');
        if p.agrees() == Some(false) {
            out.report.failures.push(format!("dichotomy violated at eta = {}", p.eta));
        }
        if let Some(err) = &p.error {
            log::warn!("sweep point eta = {} failed: {err}", p.eta);
        }
    }
    if let Some(p) = points.first() {
        out.report.note("eta_star", fmt(p.eta_star));
    }
    out.report.note("points", points.len());
    out.write("sweep.csv", &csv)
}

const FIT_HEADER: &str = "quantity,delta,prefactor,t_start,t_end,r_squared,n_points,conclusive";

fn fit_row(name: &str, f: &DecayFit) -> String {
    format!(
        "{name},{},{},{},{},{},{},{}\n",
        fmt(f.delta),
        fmt(f.prefactor),
        fmt(f.t_start),
        fmt(f.t_end),
        fmt(f.r_squared),
        f.n_points,
        f.conclusive
    )
}

fn run_stability(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let st = stepper(cfg)?;
    let opts = run_options(cfg);
    let e = &cfg.experiment;
    let target = match e.stability_target {
        StabilityTarget::Auto => {
            if st.grid_pulse_speed()?.is_some() {
                StabilityTarget::Pulse
            } else {
                StabilityTarget::Stationary
            }
        }
        t => t,
    };
    let mut fits = format!("{FIT_HEADER}\n");
    if target == StabilityTarget::Pulse {
        let r = experiments::pulse_stability_run(&st, &e.perturbation, &opts, cfg.seed)?;
        let mut csv = String::from("t,x_c,z_inf,y_dot\n");
        for p in &r.series {
            writeln!(csv, "{},{},{},{}", fmt(p.t), fmt(p.x_c), fmt(p.z_inf), fmt(p.y_dot)).unwrap();
        }
        out.write("stability_series.csv", &csv)?;
        for (name, fit) in [("z_inf", &r.z_fit), ("y_dot", &r.y_dot_fit)] {
            if let Some(f) = fit {
                fits.push_str(&fit_row(name, f));
                out.report.note(&format!("{name}_delta"), fmt(f.delta));
            }
        }
        out.report.note("v_grid", fmt(r.v_grid));
        out.report.note("final_phase", fmt(r.final_phase));
        write_trajectory(out, &r.trajectory, "")?;
        out.write("run_stats.json", &stats_json(&r.stats))?;
        check_stats(&r.stats, &mut out.report);
    } else {
        let start: StationaryStart = e.stationary_start;
        let r = experiments::stationary_stability_run(&st, start, &opts)?;
        let mut csv = String::from("t,x_c,v_c,residual_w1\n");
        for p in &r.series {
            writeln!(csv, "{},{},{},{}", fmt(p.t), fmt(p.x_c), fmt(p.v_c), fmt(p.residual_w1)).unwrap();
        }
        out.write("stability_series.csv", &csv)?;
        fits.push_str(&fit_row("residual_w1", &r.fit));
        out.report.note("x_bar", fmt(r.x_bar));
        out.report.note("settled", r.settled);
        out.report.note("final_residual_w1", fmt(r.final_residual_w1));
        out.report.note("residual_w1_delta", fmt(r.fit.delta));
        write_trajectory(out, &r.trajectory, "")?;
        out.write("run_stats.json", &stats_json(&r.stats))?;
        check_stats(&r.stats, &mut out.report);
    }
    out.write("stability_fits.csv", &fits)
}

fn run_oracle(cfg: &RunConfig, out: &mut Out) -> Result<()> {
    let reports = oracle::standard_reports(&cfg.model)?;
    let mut csv = format!("{}\n", OracleReport::CSV_HEADER);
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
        if !r.pass {
            out.report.failures.push(format!("oracle check `{}`: rel err {:.3e}", r.quantity, r.rel_err));
        }
    }
    out.report.note("checks", reports.len());
    out.report.note("failed", reports.iter().filter(|r| !r.pass).count());
    out.write("oracle.csv", &csv)
}
