//! `cqdual`: exponent sweeps, duality checks and finite-blocklength code
//! experiments for classical-quantum ensembles.
//!
//! Exit codes: 0 every check passed, 1 a check failed, 2 invalid input,
//! 3 budget refused.

mod commands;
mod input;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("budget refused: {0}")]
    Budget(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<cqdual::codes::CodesError> for CliError {
    fn from(e: cqdual::codes::CodesError) -> Self {
        if e.is_budget() {
            CliError::Budget(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<cqdual::cqtypes::TypesError> for CliError {
    fn from(e: cqdual::cqtypes::TypesError) -> Self {
        cqdual::codes::CodesError::from(e).into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Ensemble file (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "CQDUAL_JOBS")]
    pub jobs: Option<usize>,
    /// Check tolerance (command specific default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Maximum refinement depth of simplex grids.
    #[arg(long, global = true, default_value_t = 14)]
    pub grid_depth: usize,
    /// Output file; stdout when absent. The manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "cqdual", version, about = "Error exponents and operational duality for classical-quantum coding")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Exponent curve on a rate grid.
    Exponent(commands::ExponentArgs),
    /// Entropic duality checks.
    Duality(commands::DualityArgs),
    /// Finite-blocklength code constructions.
    Codes {
        #[command(subcommand)]
        sub: commands::CodesCommand,
    },
    /// Mutual information, conditional entropies and order-zero quantities.
    Quantities(commands::QuantitiesArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exponent(_) => "exponent",
            Command::Duality(_) => "duality",
            Command::Codes { sub } => sub.name(),
            Command::Quantities(_) => "quantities",
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let g = &cli.global;
    if let Some(j) = g.jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be positive".into()));
        }
        // A second initialization only happens in tests; the first pool stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let start = Instant::now();
    let spec = match &g.spec {
        Some(p) => Some(input::EnsembleSpec::read(p)?),
        None => None,
    };
    let ens = spec.as_ref().map(|s| s.validate()).transpose()?;
    let out = commands::dispatch(&cli.command, g, ens.as_ref())?;
    let text = out.render(g.format == Format::Json);
    let manifest = output::RunManifest {
        command: cli.command.name(),
        config: serde_json::json!({ "global": output::to_value(g), "args": output::to_value(&cli.command) }),
        spec: spec.as_ref().map(output::to_value),
        seed: g.seed,
        artifact_version: env!("CARGO_PKG_VERSION"),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    match &g.out {
        Some(path) => {
            output::write_text(path, &text)?;
            output::write_text(&output::manifest_path(path), &manifest)?;
        }
        None => {
            print!("{text}");
            eprint!("{manifest}");
        }
    }
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cqdual: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
