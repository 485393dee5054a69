//! `nphoton`: batch front-end for the N-photon ghost-imaging engines.

mod commands;
mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Engine;

#[derive(Parser)]
#[command(name = "nphoton", version, about = "Sub-Rayleigh ghost imaging with |1,N> states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the scenario's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Which engine evaluates images.
    #[arg(long, global = true, value_enum)]
    engine: Option<Engine>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Point-spread cross-section and Airy-radius table.
    Psf,
    /// Image of the configured object along the grid line.
    Image,
    /// Minimum resolvable separation over the sweep block.
    Resolve,
    /// Resolvability over the sweep block.
    Sweep,
    /// Monte-Carlo and closed-form speckle images.
    Speckle,
    /// Built-in invariant checks, plus sampling of the scenario if given.
    Validate,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage: exit code 2.
    Config(String),
    /// Failure while computing or writing: exit code 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<nphoton_core::Error> for CliError {
    fn from(e: nphoton_core::Error) -> Self {
        use nphoton_core::Error as E;
        match e {
            E::Convergence(_) | E::Detection(_) | E::Scan(_) | E::UndefinedVisibility(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let scenario = match &cli.config {
        Some(p) => {
            let mut s = config::load(p)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            if let Some(e) = cli.engine {
                s.engine = e;
            }
            Some(s)
        }
        None if cli.command == Command::Validate => None,
        None => return Err(CliError::Config("--config <path> is required".into())),
    };
    if cli.command == Command::Validate {
        return commands::validate(scenario.as_ref());
    }
    let scenario = scenario.expect("loaded above");
    let out = cli
        .out
        .or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("nphoton-out"));
    let dir = commands::run(cli.command, &scenario, &out)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nphoton: {e}");
            ExitCode::from(e.code())
        }
    }
}
