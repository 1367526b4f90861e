//! `ssperm`: run networked parties, local benchmarks, shared training and
//! leakage analysis.
//!
//! Exit codes: 0 on success, 1 on protocol or runtime failure, 2 on usage
//! errors. Verbosity follows `SSPERM_LOG` (e.g. `SSPERM_LOG=debug`).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssperm_core::PartyId;

use crate::commands::{bench, party, privacy, train};

#[derive(Debug, Parser)]
#[command(name = "ssperm", version, about = "Three-party secret-shared machine learning with permuted activations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one party of a networked session described by a config file.
    Party(PartyArgs),
    /// Run a config file's job with all three parties in this process.
    Run(RunArgs),
    /// Measure traffic and rounds of a canned model on random data.
    Bench(bench::BenchArgs),
    /// Train on a CSV dataset with shared parameters.
    Train(train::TrainArgs),
    /// Leakage analysis tools.
    #[command(subcommand)]
    Privacy(privacy::PrivacyCommand),
}

#[derive(Debug, Args)]
struct PartyArgs {
    /// p0, p1 or p2.
    #[arg(long, value_parser = parse_role)]
    role: PartyId,
    #[arg(long)]
    config: PathBuf,
    /// Seconds to wait for the other parties to connect.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_role(s: &str) -> Result<PartyId, String> {
    s.parse().map_err(|e: ssperm_core::Error| e.to_string())
}

/// Why a command failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ssperm_core::Error> for Failure {
    fn from(e: ssperm_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SSPERM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Party(a) => party::run_party(a.role, &a.config, a.timeout, a.out.as_deref()),
        Command::Run(a) => party::run_all(&a.config, a.out.as_deref()),
        Command::Bench(a) => bench::run(a),
        Command::Train(a) => train::run(a),
        Command::Privacy(c) => privacy::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
