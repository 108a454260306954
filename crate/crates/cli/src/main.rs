use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mefcons::simulate::RiccatiMode;

mod commands;
mod output;

use commands::{CliError, Overrides};

/// Filter-based consensus experiments driven by a TOML scenario file.
#[derive(Debug, Parser)]
#[command(name = "mefcons", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the closed loop and write the trajectory CSV.
    Simulate(Args),
    /// Spectrum, equilibrium, decay constants and disturbance bound as JSON.
    Analyze(Args),
    /// Run the classical baseline and the filter network on the same noise.
    Compare(Args),
    /// Check the disagreement norm against the input-to-state envelope.
    Envelope(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Scenario TOML, or a manifest JSON written by an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed (and the disturbance seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Spectral zero tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum)]
    riccati: Option<RiccatiArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RiccatiArg {
    Steady,
    Dynamic,
}

impl Args {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tolerance: self.tolerance,
            riccati: self.riccati.map(|r| match r {
                RiccatiArg::Steady => RiccatiMode::Steady,
                RiccatiArg::Dynamic => RiccatiMode::Dynamic,
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Analyze(a) => ("analyze", a),
        Command::Compare(a) => ("compare", a),
        Command::Envelope(a) => ("envelope", a),
    };
    let result = commands::load(&args.config, &args.overrides()).and_then(|run| match &cli.command {
        Command::Simulate(_) => commands::simulate(&run, &args.out),
        Command::Analyze(_) => commands::analyze(&run, &args.out),
        Command::Compare(_) => commands::compare(&run, &args.out),
        Command::Envelope(_) => commands::envelope(&run, &args.out),
    });
    match result {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(CliError { code, message }) => {
            eprintln!("mefcons {name}: {message}");
            ExitCode::from(code)
        }
    }
}
