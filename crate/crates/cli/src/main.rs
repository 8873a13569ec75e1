//! `resonex`: resonances and exceptional points of sound-hard disk
//! scatterers, plus the closed-form mechanical companion models.
//!
//! Every subcommand reads one JSON config, writes CSV/JSON artifacts into
//! `--out` (default: the working directory) and prints a one-line summary
//! per artifact. Config problems exit with code 2, solver failures with
//! code 3; both put a machine-readable JSON object on stderr.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error split by exit code: 2 for configuration problems, 3 for numerical
/// failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        CliError::Solver(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<resonex_core::Error> for CliError {
    fn from(e: resonex_core::Error) -> Self {
        match e {
            resonex_core::Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "resonex", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on BLAS worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed in the config (default there: 42).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resonances inside the configured contour.
    Resonances(CommonArgs),
    /// Nelder-Mead coalescence search over the two grid radii.
    EpSearch(CommonArgs),
    /// Square-root-splitting sweep under the smooth perturbation.
    Sweep(CommonArgs),
    /// Track the eigenvalue pair while epsilon encircles zero.
    Encircle(CommonArgs),
    /// Jordan-chain solvability diagnostics at one resonance.
    Jordan(CommonArgs),
    /// Resonant-state field map on a rectangle of sample points.
    Field(CommonArgs),
    /// Closed-form mechanical models: spectra, Bloch bands, encircling.
    Mech(CommonArgs),
    /// Quick end-to-end exercise of every subsystem (< 60 s).
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Resonances(a)
        | Command::EpSearch(a)
        | Command::Sweep(a)
        | Command::Encircle(a)
        | Command::Jordan(a)
        | Command::Field(a)
        | Command::Mech(a) => a.threads,
        Command::Selftest { threads } => *threads,
    };
    if let Some(threads) = threads {
        // OpenBLAS reads this at initialization, before any factorization
        // has run.
        std::env::set_var("OPENBLAS_NUM_THREADS", threads.to_string());
    }

    let result = match &cli.command {
        Command::Resonances(a) => with_config(a, commands::resonances),
        Command::EpSearch(a) => with_config(a, commands::ep_search),
        Command::Sweep(a) => with_config(a, commands::sweep),
        Command::Encircle(a) => with_config(a, commands::encircle),
        Command::Jordan(a) => with_config(a, commands::jordan),
        Command::Field(a) => with_config(a, commands::field),
        Command::Mech(a) => with_config(a, commands::mech),
        Command::Selftest { .. } => commands::selftest(),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn with_config(
    args: &CommonArgs,
    run: fn(&config::RunConfig, &output::OutDir) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let loaded = config::load(&args.config, args.seed)?;
    let out = output::OutDir::new(args.out.clone(), &loaded.hash)?;
    run(&loaded.config, &out)
}
