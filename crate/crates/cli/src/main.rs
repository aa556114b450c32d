//! codimlab: numerical laboratory for degenerate elliptic operators on
//! complements of low-dimensional boundaries.

mod commands;
mod geometry_spec;
mod outputs;
mod run_config;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

/// Exit codes: 0 pass, 1 numerical-check failure, 2 configuration error,
/// 3 internal error.
#[derive(Debug)]
pub enum CliError {
    Check(String),
    Config(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "numerical check failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "codimlab", version, about = "Smooth distances, Whitney decompositions, flatness numbers, degenerate solves, and Carleson functionals on low-dimensional boundaries")]
pub struct Cli {
    /// Worker pool cap (also: CODIMLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Emit machine-readable JSON summaries to stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for sampled diagnostics.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a boundary set; write CSV atoms and a JSON descriptor.
    Geometry(commands::GeometryArgs),
    /// Evaluate D_beta and its gradient at points from a CSV file.
    Dbeta(commands::DbetaArgs),
    /// Whitney decomposition of a box around the boundary.
    Whitney(commands::WhitneyArgs),
    /// Evaluate the cutoff function and its gradient at points.
    Cutoff(commands::CutoffArgs),
    /// The flatness number at one center and radius.
    Alpha(commands::AlphaArgs),
    /// Multi-scale flatness square sum over a ball.
    UrSum(commands::UrSumArgs),
    /// Assemble and solve a Dirichlet problem (green, hm, or custom data).
    Solve(commands::SolveArgs),
    /// Harmonic measure of a boundary patch from a pole.
    Hm(commands::HmArgs),
    /// Solve the Green function and evaluate the log-ratio functional.
    GreenCheck(commands::GreenCheckArgs),
    /// Carleson norm of a field file over a ball family.
    Carleson(commands::CarlesonArgs),
    /// The cosine-weight counterexample integral I(R).
    Counterexample(commands::CounterexampleArgs),
    /// Run a check suite profile end to end; exit 0 iff every row passes.
    PaperChecks(commands::PaperChecksArgs),
    /// Print the default run configuration as TOML.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        codimlab_core::numeric::set_threads(threads);
    }
    let outcome = match &cli.command {
        Command::Geometry(args) => commands::geometry(&cli, args),
        Command::Dbeta(args) => commands::dbeta(&cli, args),
        Command::Whitney(args) => commands::whitney(&cli, args),
        Command::Cutoff(args) => commands::cutoff(&cli, args),
        Command::Alpha(args) => commands::alpha(&cli, args),
        Command::UrSum(args) => commands::ur_sum(&cli, args),
        Command::Solve(args) => commands::solve(&cli, args),
        Command::Hm(args) => commands::hm(&cli, args),
        Command::GreenCheck(args) => commands::green_check(&cli, args),
        Command::Carleson(args) => commands::carleson(&cli, args),
        Command::Counterexample(args) => commands::counterexample(&cli, args),
        Command::PaperChecks(args) => commands::paper_checks(&cli, args),
        Command::PrintConfig => {
            println!("{}", run_config::RunConfig::default_toml());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("codimlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
