//! Experiment orchestration: one function per subcommand, each writing its
//! CSV tables and a JSON summary into the output directory.

use crate::abstract_modes::theta_exponent_sweep;
use crate::acceptance;
use crate::config::{ExperimentConfig, OutputFormat};
use crate::damping::{validate_coercive, validate_structural, DampingKind};
use crate::error::{LabError, Result};
use crate::evolution::{
    default_dt, dissipation_identity_residual, evolve, fit_decay_rate, low_mode_state, telescoped_residual,
    DecayFit, EnergyTrace, EvolveOptions,
};
use crate::generator::{CoupledGenerator, EnergyForm};
use crate::report::{write_csv, write_json, RunReport};
use crate::resolvent::{
    fit_exponent, gevrey_bound_check, resolved_frequency_limit, sweep, uniform_bound_check, SweepResult,
};
use crate::spectral::{band_abscissa, eigenvalues, SpectrumReport};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Spectrum,
    ResolventSweep,
    Evolve,
    AbstractSweep,
    ValidateDamping,
    FullAcceptance,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Spectrum,
        Subcommand::ResolventSweep,
        Subcommand::Evolve,
        Subcommand::AbstractSweep,
        Subcommand::ValidateDamping,
        Subcommand::FullAcceptance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::ResolventSweep => "resolvent-sweep",
            Subcommand::Evolve => "evolve",
            Subcommand::AbstractSweep => "abstract-sweep",
            Subcommand::ValidateDamping => "validate-damping",
            Subcommand::FullAcceptance => "full-acceptance",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown subcommand `{s}`")))
    }
}

/// Spectrum plus the abscissa restricted to the resolved band.
#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub report: SpectrumReport,
    pub resolved_frequency: f64,
    pub resolved_abscissa: f64,
}

pub fn spectrum_run(generator: &CoupledGenerator, form: &EnergyForm, cfg: &ExperimentConfig) -> Result<SpectrumRun> {
    let report = eigenvalues(generator, form, cfg.spectrum.dense_cap, cfg.spectrum.zero_tol)?;
    let resolved_frequency = 0.1 * resolved_frequency_limit(generator);
    let resolved_abscissa = band_abscissa(&report, resolved_frequency)?;
    Ok(SpectrumRun {
        report,
        resolved_frequency,
        resolved_abscissa,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveRun {
    pub trace: EnergyTrace,
    pub steps: usize,
    pub window: (f64, f64),
    pub fit: Option<DecayFit>,
    /// Largest `E_{n+1} − E_n`, relative to `E₀`.
    pub max_increase: f64,
    /// `max |q(t) − q(0)| / q(0)` for the equal-speed difference component.
    pub q_drift: f64,
    /// `min_t E(t) − q(0)`, relative to `E₀`.
    pub energy_margin: f64,
}

pub fn evolve_run(generator: &CoupledGenerator, form: &EnergyForm, cfg: &ExperimentConfig) -> Result<EvolveRun> {
    let e = &cfg.evolve;
    let init = low_mode_state(generator, form, e.modes, cfg.seed)?;
    let dt = match (e.dt, e.steps) {
        (Some(dt), _) => dt,
        (None, Some(steps)) => e.horizon / steps as f64,
        (None, None) => default_dt(generator, init.nu_max).min(e.horizon),
    };
    let opts = EvolveOptions {
        track_split: true,
        store_every: 0,
    };
    let mut trace = evolve(generator, form, &init.state, e.horizon, dt, &opts)?;
    let window = e.fit_window.map(|[a, b]| (a, b)).unwrap_or((0.5 * e.horizon, e.horizon));
    let fit = fit_decay_rate(&trace, window).ok();
    trace.fit = fit.clone();
    let e0 = trace.energies[0];
    let max_increase = trace
        .energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
        / e0;
    let q = trace.q_energy.as_deref().unwrap_or(&[]);
    let q0 = q.first().copied().unwrap_or(0.0);
    let q_drift = if q0 > 0.0 {
        q.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max) / q0
    } else {
        f64::NAN
    };
    let e_min = trace.energies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EvolveRun {
        steps: trace.times.len() - 1,
        window,
        fit,
        max_increase,
        q_drift,
        energy_margin: (e_min - q0) / e0,
        trace,
    })
}

fn timed<T>(timings: &mut std::collections::BTreeMap<String, f64>, key: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    timings.insert(key.to_string(), t.elapsed().as_secs_f64());
    out
}

/// Runs `sub` and writes its outputs under `out_dir`.
pub fn run(cfg: &ExperimentConfig, sub: Subcommand, out_dir: &Path) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut report = RunReport::new(sub.as_str(), cfg.hash(), cfg.seed);
    let csv = cfg.output.wants(OutputFormat::Csv);
    report.results = match sub {
        Subcommand::Spectrum => run_spectrum(cfg, out_dir, csv, &mut report)?,
        Subcommand::ResolventSweep => run_sweep(cfg, out_dir, csv, &mut report)?,
        Subcommand::Evolve => run_evolve(cfg, out_dir, csv, &mut report)?,
        Subcommand::AbstractSweep => run_abstract(cfg, out_dir, csv, &mut report)?,
        Subcommand::ValidateDamping => run_validate(cfg, &mut report)?,
        Subcommand::FullAcceptance => run_acceptance(cfg, out_dir, csv, &mut report)?,
    };
    report.timings.insert("total".into(), started.elapsed().as_secs_f64());
    if cfg.output.wants(OutputFormat::Json) {
        let path = out_dir.join(format!("{}.json", sub.as_str()));
        report.outputs.push(path.clone());
        write_json(&path, &report.summary())?;
    }
    Ok(report)
}

fn run_spectrum(cfg: &ExperimentConfig, out: &Path, csv: bool, report: &mut RunReport) -> Result<Value> {
    let (g, f) = cfg.generator()?;
    let s = timed(&mut report.timings, "eigensolve", || spectrum_run(&g, &f, cfg))?;
    if csv {
        let path = out.join("spectrum.csv");
        let rows: Vec<Vec<f64>> = s.report.eigenvalues.iter().map(|z| vec![z.re, z.im]).collect();
        write_csv(&path, &["re[1/time]", "im[rad/time]"], &rows)?;
        report.outputs.push(path);
    }
    let r = &s.report;
    let max_abs_re = r.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let min_modulus = r.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "count": r.eigenvalues.len(),
        "abscissa": r.abscissa,
        "resolved_abscissa": s.resolved_abscissa,
        "resolved_frequency": s.resolved_frequency,
        "clearance": r.clearance,
        "axis_count": r.axis_count,
        "zero_tol": r.zero_tol,
        "all_negative": r.all_negative,
        "operator_norm": r.operator_norm,
        "max_abs_re_scaled": max_abs_re / r.operator_norm,
        "min_modulus": min_modulus,
    }))
}

pub fn sweep_summary(s: &SweepResult) -> Value {
    let g = gevrey_bound_check(s);
    let u = uniform_bound_check(s);
    json!({
        "band": [s.band.0, s.band.1],
        "fit": s.fit,
        "static_norm": s.static_norm,
        "peaks": s.peaks.len(),
        "unconverged_peaks": s.peaks.iter().filter(|p| !p.converged).count(),
        "gevrey": g,
        "uniform": u,
    })
}

fn run_sweep(cfg: &ExperimentConfig, out: &Path, csv: bool, report: &mut RunReport) -> Result<Value> {
    let (g, f) = cfg.generator()?;
    let s = timed(&mut report.timings, "sweep", || sweep(&g, &f, &cfg.sweep_options()))?;
    if csv {
        let path = out.join("sweep.csv");
        let rows: Vec<Vec<f64>> = s.lambdas.iter().zip(&s.norms).map(|(&l, &r)| vec![l, r]).collect();
        write_csv(&path, &["lambda[rad/time]", "norm[energy-norm operator]"], &rows)?;
        report.outputs.push(path);
        let path = out.join("peaks.csv");
        let rows: Vec<Vec<f64>> = s
            .peaks
            .iter()
            .map(|p| vec![p.lambda, p.norm, if p.converged { 1.0 } else { 0.0 }])
            .collect();
        write_csv(&path, &["lambda[rad/time]", "norm[energy-norm operator]", "converged[0/1]"], &rows)?;
        report.outputs.push(path);
    }
    let mut v = sweep_summary(&s);
    if s.fit.is_none() {
        v["fit_error"] = Value::from(fit_exponent(&s, s.band).err().map(|e| e.to_string()));
    }
    Ok(v)
}

fn run_evolve(cfg: &ExperimentConfig, out: &Path, csv: bool, report: &mut RunReport) -> Result<Value> {
    let (g, f) = cfg.generator()?;
    let run = timed(&mut report.timings, "evolve", || evolve_run(&g, &f, cfg))?;
    let tr = &run.trace;
    if csv {
        let path = out.join("trace.csv");
        let q = tr.q_energy.as_deref().unwrap_or(&[]);
        let p = tr.p_energy.as_deref().unwrap_or(&[]);
        let rows: Vec<Vec<f64>> = (0..tr.times.len())
            .map(|k| {
                vec![
                    tr.times[k],
                    tr.energies[k],
                    q.get(k).copied().unwrap_or(f64::NAN),
                    p.get(k).copied().unwrap_or(f64::NAN),
                    if k == 0 { 0.0 } else { tr.dissipation[k - 1] },
                ]
            })
            .collect();
        write_csv(
            &path,
            &["t[time]", "energy[energy]", "q_energy[energy]", "p_energy[energy]", "step_dissipation[energy]"],
            &rows,
        )?;
        report.outputs.push(path);
    }
    Ok(json!({
        "dt": tr.dt,
        "steps": run.steps,
        "horizon": cfg.evolve.horizon,
        "initial_energy": tr.energies[0],
        "final_energy": tr.energies.last(),
        "telescoped_residual": telescoped_residual(tr),
        "step_identity_residual": dissipation_identity_residual(tr),
        "max_energy_increase": run.max_increase,
        "q_energy_drift": run.q_drift,
        "energy_margin_over_q0": run.energy_margin,
        "fit_window": [run.window.0, run.window.1],
        "fit": run.fit,
    }))
}

fn run_abstract(cfg: &ExperimentConfig, out: &Path, csv: bool, report: &mut RunReport) -> Result<Value> {
    let a = &cfg.abstract_model;
    let (rows, samples) = timed(&mut report.timings, "theta_sweep", || {
        theta_exponent_sweep(&cfg.abstract_base(), &a.thetas, (a.lambda_min, a.lambda_max), a.points)
    })?;
    if csv {
        let path = out.join("theta.csv");
        let t: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.theta, r.fit.gamma, r.fit.residual]).collect();
        write_csv(&path, &["theta[-]", "gamma_fit[-]", "residual[log]"], &t)?;
        report.outputs.push(path);
        let path = out.join("theta_samples.csv");
        let t: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.theta, s.lambda, s.norm]).collect();
        write_csv(&path, &["theta[-]", "lambda[rad/time]", "norm[energy-norm operator]"], &t)?;
        report.outputs.push(path);
    }
    Ok(json!({
        "a": a.a,
        "b": a.b,
        "gamma": a.gamma,
        "band": [a.lambda_min, a.lambda_max],
        "points": a.points,
        "rows": rows,
    }))
}

fn run_validate(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<Value> {
    let ops = cfg.operators()?;
    let grid = ops.grid.clone();
    let profile = cfg.damping_profile(&ops)?;
    let omega = cfg.damping_support()?;
    let structural = timed(&mut report.timings, "structural", || {
        validate_structural(&profile, cfg.damping.floor, cfg.damping.cap, &grid)
    });
    let coercive = cfg.damping.kind != DampingKind::Zero && validate_coercive(&profile, &omega, cfg.damping.a0, &grid);
    Ok(match structural {
        Ok(s) => json!({
            "kind": cfg.damping.kind,
            "m1": s.m1,
            "m2": s.m2,
            "floor": s.floor,
            "cap": s.cap,
            "samples": s.samples,
            "coercivity": s.coercivity,
            "coercive": coercive,
            "pass": s.pass && coercive,
        }),
        Err(LabError::NotApplicable(reason)) => json!({
            "kind": cfg.damping.kind,
            "coercive": coercive,
            "pass": false,
            "not_applicable": reason,
        }),
        Err(e) => return Err(e),
    })
}

fn run_acceptance(cfg: &ExperimentConfig, out: &Path, csv: bool, report: &mut RunReport) -> Result<Value> {
    let outcomes = timed(&mut report.timings, "acceptance", || Ok(acceptance::run_all(cfg.seed)))?;
    for o in &outcomes {
        report.timings.insert(format!("criterion_{}", o.id), o.seconds);
    }
    let text: String = outcomes.iter().map(|o| format!("{}\n", o.line())).collect();
    let path = out.join("acceptance.txt");
    std::fs::write(&path, &text)?;
    report.outputs.push(path);
    if csv {
        let path = out.join("acceptance.csv");
        let rows: Vec<Vec<f64>> = outcomes
            .iter()
            .map(|o| vec![o.id as f64, if o.pass { 1.0 } else { 0.0 }])
            .collect();
        write_csv(&path, &["criterion[-]", "pass[0/1]"], &rows)?;
        report.outputs.push(path);
    }
    Ok(json!({
        "all_pass": outcomes.iter().all(|o| o.pass),
        "criteria": outcomes,
    }))
}
