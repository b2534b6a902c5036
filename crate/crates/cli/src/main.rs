//! Command-line front end: parameter sweeps emitting plot-ready data
//! files, correlator maximization runs, and measurement-noise studies.

mod commands;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use output::{Format, Table};

#[derive(Parser)]
#[command(name = "lgsim", version, about = "Leggett-Garg test simulator for N-level systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Four-time correlator sweep over (theta3, phi3).
    SweepK4(SweepArgs),
    /// Three-time correlator sweep over (theta, phi).
    SweepK3(SweepArgs),
    /// Quantum-witness sweep over (theta, phi).
    SweepWitness(SweepArgs),
    /// Maximize the K correlator over unitaries, labelings, and (when
    /// unconstrained) the preparation state.
    Optimize(OptimizeArgs),
    /// Monte Carlo error models at the protocol maxima.
    Noise(NoiseArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Seed for the seeded commands; echoed in the metadata either way.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit the timestamp so identical runs are byte-identical.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid override; repeatable, one per parameter.
    #[arg(long = "grid", value_name = "NAME=START:STOP:STEPS")]
    grids: Vec<String>,
    /// Interpret grid bounds as degrees instead of radians.
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// System dimension N (measured with M = N projectors).
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Number of time slots: 3 for K3, 4 for K4.
    #[arg(long, default_value_t = 3)]
    times: usize,
    /// Dictate Q(t1) = +1 by preparing the slot-1 outcome.
    #[arg(
        long,
        value_name = "BOOL",
        num_args = 0..=1,
        default_value_t = false,
        default_missing_value = "true",
        action = clap::ArgAction::Set
    )]
    constrained: bool,
    /// Search budget, RESTARTS:ITERATIONS.
    #[arg(long, default_value = "64:2000")]
    budget: String,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Expected total detection events per parameter point.
    #[arg(long, default_value_t = 28_000.0)]
    counts: f64,
    /// Monte Carlo repetitions per error model.
    #[arg(long, default_value_t = 500)]
    repeats: usize,
    /// Wave-plate angle error, degrees (1 sigma).
    #[arg(long, default_value_t = 0.1, value_name = "DEG")]
    plate_sigma: f64,
    /// Wave plates per stage unitary; defaults to the stage's rotation
    /// count.
    #[arg(long)]
    plates: Option<usize>,
}

enum CliError {
    Config(String),
    Io(std::io::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Io(error)) => {
            eprintln!("error: {error}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let command_echo: Vec<String> = std::env::args().skip(1).collect();
    let common = match &cli.command {
        Command::SweepK4(args) | Command::SweepK3(args) | Command::SweepWitness(args) => {
            &args.common
        }
        Command::Optimize(args) => &args.common,
        Command::Noise(args) => &args.common,
    };

    let mut metadata = vec![
        (
            "tool".to_string(),
            format!("lgsim {}", env!("CARGO_PKG_VERSION")),
        ),
        ("command".to_string(), command_echo.join(" ")),
        ("seed".to_string(), common.seed.to_string()),
    ];

    let (extra, columns, rows) = match &cli.command {
        Command::SweepK4(args) => commands::sweep_k4(&args.grids, args.degrees),
        Command::SweepK3(args) => commands::sweep_k3(&args.grids, args.degrees),
        Command::SweepWitness(args) => commands::sweep_witness(&args.grids, args.degrees),
        Command::Optimize(args) => {
            let budget = commands::parse_budget(&args.budget).map_err(CliError::Config)?;
            commands::optimize(
                args.levels,
                args.times,
                args.constrained,
                budget,
                args.common.seed,
            )
        }
        Command::Noise(args) => {
            if args.repeats < 2 {
                return Err(CliError::Config(format!(
                    "repeats must be at least 2, got {}",
                    args.repeats
                )));
            }
            commands::noise(
                args.counts,
                args.repeats,
                args.plate_sigma,
                args.plates,
                args.common.seed,
            )
        }
    }
    .map_err(CliError::Config)?;

    metadata.extend(extra);
    if !common.deterministic {
        let unix_seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .expect("clock after 1970")
            .as_secs();
        metadata.push(("timestamp_unix_s".to_string(), unix_seconds.to_string()));
    }

    let table = Table {
        metadata,
        columns,
        rows,
    };
    table
        .write(common.format, common.out.as_deref())
        .map_err(CliError::Io)
}
