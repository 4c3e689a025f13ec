//! `taut`: seeded taut-string campaigns writing CSV/JSON artifacts.
//!
//! Exit status is 0 when the run's checks hold, 1 when a check fails and 2 on
//! usage errors.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use taut_core::Error;

use commands::{Campaign, Verdict};
use config::{Flags, UsageError};

#[derive(Parser)]
#[command(name = "taut", version, about = "Taut strings of Brownian paths and their renewal structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brownian path CSV (`path.csv`).
    Gen(Flags),
    /// Taut string of an input path (`string.csv`).
    Solve(Flags),
    /// h-extrema decomposition of an input path (`decomposition.csv`).
    Decompose(Flags),
    /// Global string against block minimizers (`theorem_report.json`).
    VerifyDecomposition(Flags),
    /// Solver against per-penalty oracle minimizers (`invariance_report.json`).
    VerifyInvariance(Flags),
    /// Solver against the oracle on random instances (`oracle_report.json`).
    OracleCheck(Flags),
    /// Renewal samples and energy-rate estimate (`samples.csv`, `estimate_report.json`).
    EstimateC(Flags),
    /// Standardized energies of long paths (`clt_statistics.csv`, `clt_report.json`).
    Clt(Flags),
    /// Randomly indexed reward sums (`anscombe_statistics.csv`, `anscombe_report.json`).
    Anscombe(Flags),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::ConvergenceFailure { .. } | Error::DegenerateVariance(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags, run): (&'static str, Flags, fn(&mut Campaign) -> anyhow::Result<Verdict>) = match cli.command {
        Command::Gen(f) => ("gen", f, commands::gen),
        Command::Solve(f) => ("solve", f, commands::solve_cmd),
        Command::Decompose(f) => ("decompose", f, commands::decompose_cmd),
        Command::VerifyDecomposition(f) => ("verify-decomposition", f, commands::verify_decomposition),
        Command::VerifyInvariance(f) => ("verify-invariance", f, commands::verify_invariance),
        Command::OracleCheck(f) => ("oracle-check", f, commands::oracle_check_cmd),
        Command::EstimateC(f) => ("estimate-c", f, commands::estimate_c),
        Command::Clt(f) => ("clt", f, commands::clt),
        Command::Anscombe(f) => ("anscombe", f, commands::anscombe),
    };
    let outcome = flags
        .resolve()
        .map_err(anyhow::Error::from)
        .and_then(|config| run(&mut Campaign::new(name, config)));
    match outcome {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => {
            eprintln!("{name}: check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{name}: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
