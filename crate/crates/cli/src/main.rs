//! `multiparticle`: simulate, analyse and steer forced particle chains from
//! flat `key=value` configuration files.
//!
//! Every command prints a JSON report with a `verdict` field and an echo of
//! the resolved configuration. With `--out DIR` the report and any CSV data
//! are also written to `DIR`.
//!
//! Exit codes: 0 success, 1 verdict fail or not found, 2 usage or
//! configuration error, 3 numerical failure.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use multiparticle::Error;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "multiparticle", version, about = "Controllability toolkit for forced particle chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// System and run parameters (`key=value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory for the JSON report and CSV outputs.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the controlled equations and report conservation.
    Simulate {
        /// CSV of `duration,u1[,u2]` rows; zero control for `horizon` if absent.
        #[arg(long, value_name = "PATH")]
        control: Option<PathBuf>,
    },
    /// Accessibility rank at a point.
    Rank,
    /// Classify the potential as generic or even/odd-shift degenerate.
    GenericCheck,
    /// Run one of the invariant-plane counterexamples.
    Counterexample {
        #[arg(long, value_enum)]
        case: Case,
    },
    /// Plan a forward-time steering between two states.
    Steer,
    /// Search for a return of the free flow.
    Recurrence,
    /// Energy box of a sublevel set, checked by rejection sampling.
    Bounds {
        /// Also write the accepted samples to `samples.csv` (needs `--out`).
        #[arg(long)]
        samples_csv: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    PeriodicQuartic,
    NonperiodicHarmonic,
    TodaNegative,
}

/// Why a command did not produce a report.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::StepUnderflow { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => ExitCode::from(if pass { 0 } else { 1 }),
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    }
    let ctx = commands::Context::load(cli.config.as_deref(), cli.seed, cli.out.clone())?;
    let report = match cli.command {
        Command::Simulate { control } => commands::simulate(&ctx, control.as_deref())?,
        Command::Rank => commands::rank(&ctx)?,
        Command::GenericCheck => commands::generic_check(&ctx)?,
        Command::Counterexample { case } => commands::counterexample(&ctx, case)?,
        Command::Steer => commands::steer(&ctx)?,
        Command::Recurrence => commands::recurrence(&ctx)?,
        Command::Bounds { samples_csv } => commands::bounds(&ctx, samples_csv)?,
    };
    let pass = report.verdict == commands::Verdict::Pass;
    let text = report.to_json(&ctx);
    println!("{text}");
    ctx.write(&format!("{}.json", report.command), &text)?;
    for (name, body) in &report.files {
        ctx.write(name, body)?;
    }
    Ok(pass)
}
