//! Executes a resolved [`RunConfig`] and maps failures to exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;
use vtem::montecarlo::{write_error_csv, write_path_csv, write_stability_csv};
use vtem::{
    estimate_strong_error, example_scalar_cubic_with_rho, load_model, simulate, stability_experiment,
    BrownianGrid, Error, ModelBundleF64, MonteCarloSettings, Scheme, SchemeConfig, BUILTIN_MODELS,
};

use crate::config::{Command, ConfigError, RunConfig, SchemeChoice};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e {
            Error::Validation { .. } => CliError::Validation(text),
            Error::NumericFailure { .. } | Error::DegenerateInput(_) => CliError::Numeric(text),
            Error::Config(_) | Error::Domain(_) | Error::PolicyViolation(_) => CliError::Config(text),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn load(cfg: &RunConfig) -> Result<ModelBundleF64, CliError> {
    let bundle = match cfg.rho {
        Some(rho) if cfg.model == "scalar-cubic" => example_scalar_cubic_with_rho(rho)?,
        Some(_) => {
            return Err(CliError::Config(format!(
                "`rho` selects the Lyapunov exponent of scalar-cubic only; model `{}` fixes its own",
                cfg.model
            )))
        }
        None => load_model(&cfg.model)?,
    };
    match &cfg.x0 {
        Some(x0) => Ok(bundle.with_initial_state(x0.clone())?),
        None => Ok(bundle),
    }
}

fn settings(cfg: &RunConfig) -> MonteCarloSettings {
    let s = MonteCarloSettings::new(cfg.paths, cfg.seed);
    match cfg.workers {
        Some(w) => s.with_workers(w),
        None => s,
    }
}

fn with_output(
    cfg: &RunConfig,
    write: impl FnOnce(&mut BufWriter<File>) -> vtem::Result<()>,
) -> Result<(), CliError> {
    let Some(path) = &cfg.out else { return Ok(()) };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Runs one command, printing its summary to `out`.
pub fn run(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    match cfg.command {
        Command::ListModels => list_models(out),
        Command::Validate => validate(cfg, out),
        Command::Simulate => simulate_one(cfg, out),
        Command::Converge => converge(cfg, out),
        Command::Stability => stability(cfg, out),
    }
}

fn say(out: &mut impl Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::Config(format!("write: {e}")))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { say($out, format_args!($($arg)*)) };
}

fn list_models(out: &mut impl Write) -> Result<(), CliError> {
    for (name, description) in BUILTIN_MODELS {
        say!(out, "{name:<16}{description}")?;
    }
    say!(out, "(any other value of --model is read as a polynomial model description file)")
}

fn validate(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let bundle = load(cfg)?;
    let reports = bundle.validate_all()?;
    let mut failed = 0;
    for r in &reports {
        if r.passed() {
            say!(out, "pass  {} ({} points, {} skipped)", r.check, r.checked, r.skipped)?;
        } else {
            failed += 1;
            let v = &r.violations[0];
            say!(
                out,
                "FAIL  {} ({} of {} points): {}: {} > {} at {:?}",
                r.check,
                r.violations.len(),
                r.checked,
                v.detail,
                v.lhs,
                v.rhs,
                v.witness
            )?;
        }
    }
    say!(out, "{}: {} passed, {} failed", bundle.name, reports.len() - failed, failed)?;
    if failed > 0 {
        return Err(CliError::Validation(format!("{failed} validator(s) failed for {}", bundle.name)));
    }
    Ok(())
}

fn simulate_one(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let bundle = load(cfg)?;
    let dt = cfg.dt.expect("required");
    let scheme = match cfg.scheme {
        SchemeChoice::Truncated => Scheme::Truncated(bundle.policy.clone()),
        SchemeChoice::Classical => Scheme::Classical,
    };
    let sc = SchemeConfig::new(scheme, dt, cfg.horizon, bundle.x0.clone())?;
    let grid = BrownianGrid::generate(cfg.seed, 0, cfg.horizon, dt, bundle.system.noise_dim())?;
    let path = simulate(&sc, &bundle.system, &bundle.lyapunov, &grid)?;
    with_output(cfg, |w| write_path_csv(&path, w))?;
    say!(out, "model {} scheme {} dt {dt} T {} seed {}", bundle.name, sc.scheme.name(), cfg.horizon, cfg.seed)?;
    if let Some(r) = path.radius {
        say!(out, "truncation radius {r:.6}")?;
    }
    say!(out, "steps {}", path.len() - 1)?;
    say!(out, "terminal state {:?}", path.terminal())?;
    say!(out, "max |Y_k| {:.6}", path.max_norm)?;
    match path.first_truncation_step {
        Some(k) => say!(out, "first truncation at step {k}")?,
        None => say!(out, "never truncated")?,
    }
    if let Some(k) = path.diverged_at {
        say!(out, "diverged at step {k}")?;
    }
    Ok(())
}

fn converge(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let mut bundle = load(cfg)?;
    if cfg.x0.is_none() {
        if let Some(x0) = bundle.convergence_x0.clone() {
            bundle = bundle.with_initial_state(x0)?;
        }
    }
    let dt_ref = cfg.dt_ref.expect("required");
    let report = estimate_strong_error(
        &bundle,
        cfg.q,
        &cfg.dt_list,
        dt_ref,
        cfg.horizon,
        &settings(cfg),
        bundle.rate.as_ref(),
    )?;
    with_output(cfg, |w| write_error_csv(&report, w))?;
    say!(
        out,
        "model {} x0 {:?} q {} T {} paths {} seed {} dt_ref {dt_ref:e}",
        bundle.name,
        bundle.x0,
        cfg.q,
        cfg.horizon,
        cfg.paths,
        cfg.seed
    )?;
    say!(out, "{:>14} {:>14} {:>14}", "dt", "mean_error", "stderr")?;
    for r in &report.rows {
        say!(out, "{:>14.6e} {:>14.6e} {:>14.6e}", r.dt, r.mean_error, r.stderr)?;
    }
    match report.fit {
        Some((slope, intercept)) => say!(out, "slope {slope:.4} (log intercept {intercept:.4})"),
        None => Err(CliError::Numeric(
            "no slope: fewer than three step sizes with positive error".into(),
        )),
    }
}

fn stability(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let bundle = load(cfg)?;
    let dt = cfg.dt.expect("required");
    let r = stability_experiment(&bundle, dt, cfg.horizon, &settings(cfg), cfg.threshold)?;
    with_output(cfg, |w| write_stability_csv(&r, w))?;
    say!(
        out,
        "model {} x0 {:?} dt {dt} T {} paths {} seed {}",
        bundle.name,
        bundle.x0,
        cfg.horizon,
        cfg.paths,
        cfg.seed
    )?;
    say!(out, "truncation radius {:.6}", r.radius)?;
    say!(out, "truncated: converged {:.4} (threshold {}), bounded {:.4}", r.converged_fraction, cfg.threshold, r.bounded_fraction)?;
    say!(out, "truncated: median log V slope {:.4} (SE {:.4}), slope of log E V^rho {:.4}", r.median_slope, r.median_slope_stderr, r.mean_moment_slope)?;
    say!(out, "classical: diverged {:.4}", r.classical_divergence_fraction)
}
