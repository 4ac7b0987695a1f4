//! `vtem` command-line front end.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, resolve, Command, FileValues, FlagValues, WORKERS_ENV};
use run::CliError;

/// Truncated Euler-Maruyama simulations, convergence and stability studies.
#[derive(Debug, Parser)]
#[command(name = "vtem", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Run every hypothesis validator on a model.
    Validate,
    /// Simulate one path and write it as CSV.
    Simulate,
    /// Strong error against a fine reference for a list of step sizes.
    Converge,
    /// Truncated vs classical long-time behaviour over many paths.
    Stability,
    /// List the built-in models.
    ListModels,
}

#[derive(Debug, Args)]
struct Opts {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in model name or path to a model description file.
    #[arg(long, global = true)]
    model: Option<String>,
    /// truncated or classical.
    #[arg(long, global = true)]
    scheme: Option<String>,
    #[arg(long, global = true)]
    dt: Option<String>,
    /// `2^-6..2^-12` or a comma-separated list.
    #[arg(long = "dt-list", global = true)]
    dt_list: Option<String>,
    #[arg(long = "dt-ref", global = true)]
    dt_ref: Option<String>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<String>,
    #[arg(long, global = true)]
    paths: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Error exponent: the estimator averages |Y - Y_ref|^q.
    #[arg(long, global = true)]
    q: Option<String>,
    /// Lyapunov exponent of scalar-cubic.
    #[arg(long, global = true)]
    rho: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Distance to the decay kernel counted as converged.
    #[arg(long, global = true)]
    threshold: Option<String>,
    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (default from VTEM_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<String>,
}

impl Opts {
    fn flag_values(&self) -> FlagValues {
        let pairs: [(&'static str, &Option<String>); 14] = [
            ("model", &self.model),
            ("scheme", &self.scheme),
            ("dt", &self.dt),
            ("dt-list", &self.dt_list),
            ("dt-ref", &self.dt_ref),
            ("T", &self.horizon),
            ("paths", &self.paths),
            ("seed", &self.seed),
            ("q", &self.q),
            ("rho", &self.rho),
            ("x0", &self.x0),
            ("threshold", &self.threshold),
            ("out", &self.out),
            ("workers", &self.workers),
        ];
        FlagValues(
            pairs
                .into_iter()
                .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
                .collect(),
        )
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let command = match cli.command {
        Sub::Validate => Command::Validate,
        Sub::Simulate => Command::Simulate,
        Sub::Converge => Command::Converge,
        Sub::Stability => Command::Stability,
        Sub::ListModels => Command::ListModels,
    };
    let file = match &cli.opts.config {
        None => FileValues::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text, command)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    let env = std::env::var(WORKERS_ENV).ok();
    let cfg = resolve(command, &cli.opts.flag_values(), &file, env.as_deref())?;
    let stdout = std::io::stdout();
    run::run(&cfg, &mut stdout.lock())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
