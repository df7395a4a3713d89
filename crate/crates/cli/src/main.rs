use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use guerra_cascades::par::with_workers;
use guerra_cli::commands::{run, Command};
use guerra_cli::config::{load, ConfigError};
use guerra_cli::report::write_output;
use guerra_cli::{EXIT_FAIL, EXIT_PASS, EXIT_USAGE, WORKERS_ENV};

/// Checks for Poisson-Dirichlet processes, Ruelle cascades and the k-RSB
/// free-energy bound. Settings come from `--config` and are overridden by
/// flags; the worker count comes from GUERRA_WORKERS.
#[derive(Parser)]
#[command(name = "guerra", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// PD pair sums, plus mark identities when `marks` is set.
    Pd(Flags),
    /// Cascade overlap masses.
    Cascade(Flags),
    /// The bound at fixed parameters, or a k = 1 scan over `q_grid`.
    Bound(Flags),
    /// Minimize the bound over parameters at depth `k`.
    Optimize(Flags),
    /// Exact-enumeration free energy.
    SkExact(Flags),
    /// Interpolation checks at one time, plus a phi(t) series for the CSV.
    Interpolate(Flags),
    /// The full acceptance matrix.
    VerifyAll(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `(p, beta)` pairs, e.g. `2:1.0,4:0.5`.
    #[arg(long)]
    mixture: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// phi, derivative, overlap or error-term.
    #[arg(long)]
    check: Option<String>,
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    #[arg(long = "q-grid")]
    q_grid: Option<String>,
    /// desk or smoke.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    sigmas: Option<String>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    json: Option<String>,
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    snapshot: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut out = Vec::new();
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got `{item}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let named = [
            ("seed", &self.seed),
            ("mixture", &self.mixture),
            ("h", &self.h),
            ("m", &self.m),
            ("q", &self.q),
            ("k", &self.k),
            ("n", &self.n),
            ("b", &self.b),
            ("n_max", &self.n_max),
            ("replicas", &self.replicas),
            ("nodes", &self.nodes),
            ("t", &self.t),
            ("r", &self.r),
            ("delta", &self.delta),
            ("t_grid", &self.t_grid),
            ("q_grid", &self.q_grid),
            ("sigmas", &self.sigmas),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        }
        // string-valued keys are quoted so they never parse as numbers
        let strings = [
            ("check", &self.check),
            ("preset", &self.preset),
            ("json", &self.json),
            ("csv", &self.csv),
            ("snapshot", &self.snapshot),
        ];
        for (key, value) in strings {
            if let Some(v) = value {
                out.push((key.to_string(), format!("{v:?}")));
            }
        }
        Ok(out)
    }
}

fn workers() -> Result<Option<usize>, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .map(Some)
            .ok_or_else(|| ConfigError(format!("{WORKERS_ENV} = `{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command, flags: &Flags) -> Result<bool, ConfigError> {
    let config = load(flags.config.as_deref(), &flags.overrides()?)?;
    let outcome = with_workers(workers()?, || run(command, &config))?;
    write_output(config.json.as_deref(), &outcome.report.to_json())?;
    if let (Some(path), Some(table)) = (&config.csv, &outcome.table) {
        write_output(Some(path), &table.to_csv())?;
    }
    for (path, text) in &outcome.extra {
        write_output(Some(path), text)?;
    }
    Ok(outcome.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Pd(f) => (Command::Pd, f),
        Sub::Cascade(f) => (Command::Cascade, f),
        Sub::Bound(f) => (Command::Bound, f),
        Sub::Optimize(f) => (Command::Optimize, f),
        Sub::SkExact(f) => (Command::SkExact, f),
        Sub::Interpolate(f) => (Command::Interpolate, f),
        Sub::VerifyAll(f) => (Command::VerifyAll, f),
    };
    let code = match execute(command, flags) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("guerra {}: some checks failed", command.name());
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("guerra {}: {e}", command.name());
            EXIT_USAGE
        }
    };
    ExitCode::from(code as u8)
}
