//! Command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, GridArg, RunConfig};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_SPLICE: u8 = 3;
pub const EXIT_INCOMPATIBLE: u8 = 4;
pub const EXIT_TOLERANCE: u8 = 5;
pub const EXIT_INCONCLUSIVE: u8 = 6;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }
}

impl From<arrhenius_rd::Error> for CliError {
    fn from(e: arrhenius_rd::Error) -> Self {
        use arrhenius_rd::Error as E;
        let code = match e {
            E::Incompatible { .. } => EXIT_INCOMPATIBLE,
            E::Parameter(_) | E::Precondition(_) | E::Serde(_) => EXIT_INVALID,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "arrhenius-rd", version, about = "Exact separable solutions of Arrhenius reaction-diffusion equations")]
struct Cli {
    /// Run configuration (JSON, schema arrhenius-rd/run/v1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance for the command's pass/fail check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Preset id: N or N-variant.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Grid as NR,NT.
    #[arg(long, global = true)]
    grid: Option<GridArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Tabulate D, R and u over θ for a scenario's pair.
    ConstructReaction,
    /// Build the Arrhenius-compatible diffusivity with overlays.
    BuildDiffusivity,
    /// Emit θ, u and flux profiles at the scenario times.
    Solve,
    /// Check the PDE residual of an assembled solution.
    Verify,
    /// Evaluate the stability criterion and optional experiment.
    Stability,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ConstructReaction => "construct-reaction",
            Command::BuildDiffusivity => "build-diffusivity",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Stability => "stability",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.merge_flags(&Flags {
        preset: cli.preset.clone(),
        grid: cli.grid,
        out: cli.out.clone(),
        tol: cli.tol,
    });
    cfg.validate(cli.command.name())?;
    match cli.command {
        Command::ConstructReaction => commands::construct_reaction(&cfg),
        Command::BuildDiffusivity => commands::build_diffusivity_cmd(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Stability => commands::stability(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
