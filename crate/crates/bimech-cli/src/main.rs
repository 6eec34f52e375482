//! `bimech`: generate scheduling and auction instances, run the exact
//! solvers, synthesize truthful mechanisms, and audit them.
//!
//! Every command is a pure function of (input file, flags, seed): reruns
//! produce byte-identical artifacts. Exit codes: 0 success, 1 usage or
//! input error, 2 capacity cap exceeded, 3 search nonconvergence.

mod commands;
mod format;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(bimech_core::Error),
}

impl CliError {
    pub fn usage<S: Into<String>>(msg: S) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(bimech_core::Error::Capacity(_)) => 2,
            CliError::Core(bimech_core::Error::Nonconvergence(_)) => 3,
            CliError::Core(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

impl From<bimech_core::Error> for CliError {
    fn from(e: bimech_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(name = "bimech", version, about)]
pub struct Cli {
    /// Worker threads for batch commands; 1 keeps runs reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Run a scheduling solver on an instance file.
    Solve(SolveArgs),
    /// Synthesize a truthful mechanism for an auction instance.
    Mechanism(MechanismArgs),
    /// Audit a mechanism file by Monte Carlo simulation.
    Verify(VerifyArgs),
    /// Exact optimum by exhaustive enumeration.
    Brute(BruteArgs),
    /// Time a solver over a batch of random instances.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Scheduling,
    Bmed,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    /// Machines (scheduling) or bidders (bmed).
    #[arg(short, long)]
    pub machines: usize,
    /// Jobs.
    #[arg(short, long)]
    pub jobs: usize,
    /// Types per bidder (bmed only).
    #[arg(short, long, default_value_t = 2)]
    pub types: usize,
    #[arg(long, value_enum, default_value = "makespan")]
    pub objective: commands::ObjectiveArg,
    /// All generated rationals have denominator at most this bound.
    #[arg(long, default_value_t = 8)]
    pub denom: u64,
    #[arg(short, long)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveVariant {
    Makespan,
    FairnessAs,
    FairnessBd,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub variant: SolveVariant,
    #[arg(short, long)]
    pub input: String,
    /// Required by the randomized fairness-as pipeline.
    #[arg(short, long)]
    pub seed: Option<u64>,
    /// Certify the factor guarantee against the exhaustive optimum.
    #[arg(long)]
    pub verify: bool,
    #[arg(short, long)]
    pub out: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismVariant {
    Makespan,
    FairnessBd,
}

#[derive(Args)]
pub struct MechanismArgs {
    #[arg(long, value_enum)]
    pub variant: MechanismVariant,
    #[arg(short, long)]
    pub input: String,
    /// Target additive error, e.g. 1/20.
    #[arg(short, long)]
    pub epsilon: String,
    #[arg(short, long)]
    pub seed: u64,
    /// Empirical-distribution sample count; defaults to a bound sized
    /// against epsilon.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(short, long)]
    pub out: String,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(short, long)]
    pub mechanism: String,
    #[arg(short, long, default_value_t = 100_000)]
    pub runs: usize,
    #[arg(short, long)]
    pub seed: u64,
    /// Compare against the exhaustive optimum (desk-scale instances only).
    #[arg(long)]
    pub brute: bool,
    #[arg(short, long)]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct BruteArgs {
    #[arg(short, long)]
    pub input: String,
    /// Objective for scheduling instances; auction files carry their own.
    #[arg(long, value_enum, default_value = "makespan")]
    pub objective: commands::ObjectiveArg,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub variant: SolveVariant,
    #[arg(short, long)]
    pub machines: usize,
    #[arg(short, long)]
    pub jobs: usize,
    #[arg(short, long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
