//! `bitbias` command-line front end.

mod commands;
mod out;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use out::Failure;

/// Funnel-plot, Markov-source and rescaled-range diagnostics for databases
/// of binary-outcome experiments.
///
/// Symbol mapping: --p11/--p00 are the self-transition probabilities of the
/// two-state source (stay at 1 / stay at 0); --z0 is the significance
/// multiplier of the confidence envelope; V is the variance factor that
/// broadens it.
///
/// Exit codes: 0 success, 2 input or validation error, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "bitbias", version, about, long_about)]
struct Cli {
    /// Write floating-point values at full precision instead of 6
    /// significant digits.
    #[arg(long, global = true)]
    full_precision: bool,

    /// Format of diagnostics printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a two-state Markov bit sequence, or a funnel of simulated
    /// study means with --funnel.
    Simulate(commands::SimulateArgs),
    /// Draw a synthetic study database as a record CSV.
    Synth(commands::SynthArgs),
    /// Funnel-plot diagnostics for a record CSV.
    Funnel(commands::FunnelArgs),
    /// Rescaled-range analysis of record effect sizes or a numeric series.
    Hurst(commands::HurstArgs),
    /// Run the full analysis suite and write a bundle of charts and tables.
    Report(report::ReportArgs),
}

/// Seed handling shared by every randomized subcommand.
#[derive(Debug, Args, Clone)]
pub struct SeedArg {
    /// Seed for all randomness. Drawn from entropy and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    pub fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            s
        })
    }
}

/// Shared output settings.
pub struct Ctx {
    pub precision: bitbias_core::io::Precision,
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        precision: if cli.full_precision {
            bitbias_core::io::Precision::Full
        } else {
            bitbias_core::io::Precision::Sig6
        },
        json: cli.format == Format::Json,
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &ctx),
        Command::Synth(a) => commands::synth(&a, &ctx),
        Command::Funnel(a) => commands::funnel(&a, &ctx),
        Command::Hurst(a) => commands::hurst(&a, &ctx),
        Command::Report(a) => report::run(&a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

/// Input path where "-" means stdin.
pub fn is_stdin(p: &std::path::Path) -> bool {
    p == std::path::Path::new("-")
}

pub type CmdResult<T = ()> = Result<T, Failure>;
