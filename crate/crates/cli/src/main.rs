//! Command-line front end: simulate a pricing strategy, run the
//! rolling-horizon optimizer, compare strategies, or sweep the revenue
//! weight. See `evpricer --help`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use evpricer_core::choice::ChoiceMode;

#[derive(Parser)]
#[command(name = "evpricer", version, about = "EV charging price simulation and bi-level optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PricingArg {
    Fixed,
    Tou,
    DynamicFile,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChoiceArg {
    Dc,
    Mnl,
    Msa,
}

impl From<ChoiceArg> for ChoiceMode {
    fn from(value: ChoiceArg) -> Self {
        match value {
            ChoiceArg::Dc => ChoiceMode::DeterministicDc,
            ChoiceArg::Mnl => ChoiceMode::MnlStandard,
            ChoiceArg::Msa => ChoiceMode::MnlMsa,
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Master seed; defaults to the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to machine parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with code 3 when any window or hour fails to converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Clone, Default)]
struct CemArgs {
    /// CEM samples per iteration.
    #[arg(long)]
    population: Option<usize>,
    /// Elite fraction in (0, 1).
    #[arg(long)]
    elite_ratio: Option<f64>,
    /// Smoothing weight kept on the previous distribution.
    #[arg(long)]
    smoothing: Option<f64>,
    /// Relative elite-spread stopping threshold.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Sensitivity threshold in nats.
    #[arg(long)]
    psa_threshold: Option<f64>,
    /// Sensitivity screen period in iterations (0 disables).
    #[arg(long)]
    psa_frequency: Option<usize>,
    /// Full re-evaluation of frozen populations in the sensitivity screen.
    #[arg(long)]
    psa_exact: bool,
    /// Hours per rolling window.
    #[arg(long)]
    window_hours: Option<usize>,
    /// Seed each window's sampling mean from the previous winner.
    #[arg(long)]
    warm_start: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one pricing strategy over the horizon.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = PricingArg::Fixed)]
        pricing: PricingArg,
        /// Constant price for `--pricing fixed`, $/kWh.
        #[arg(long, default_value_t = 0.5)]
        price_level: f64,
        /// Peak price for `--pricing tou`, $/kWh.
        #[arg(long, default_value_t = 0.6)]
        peak_price: f64,
        /// Off-peak price for `--pricing tou`, $/kWh.
        #[arg(long, default_value_t = 0.3)]
        offpeak_price: f64,
        /// Peak hours, e.g. "8-17" or "7,8,18".
        #[arg(long, default_value = "8-17")]
        peak_hours: String,
        /// Stored schedule for `--pricing dynamic-file`.
        #[arg(long)]
        prices_file: Option<PathBuf>,
        /// Follower model override.
        #[arg(long, value_enum)]
        choice: Option<ChoiceArg>,
    },
    /// Optimize hourly prices window by window.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cem: CemArgs,
        #[arg(long, value_enum)]
        choice: Option<ChoiceArg>,
    },
    /// Run fixed, ToU, and optimized dynamic pricing under a shared seed.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cem: CemArgs,
        #[arg(long, default_value_t = 0.5)]
        price_level: f64,
        #[arg(long, default_value_t = 0.6)]
        peak_price: f64,
        #[arg(long, default_value_t = 0.3)]
        offpeak_price: f64,
        #[arg(long, default_value = "8-17")]
        peak_hours: String,
    },
    /// Optimize under several revenue weights and tabulate the outcomes.
    OmegaSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cem: CemArgs,
        /// Comma-separated weights in [0, 1].
        #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
        omegas: String,
    },
}

/// Error-to-exit-code mapping: 1 usage, 2 validation, 3 non-convergence
/// under --strict.
pub enum CliError {
    Usage(String),
    Validation(String),
    NonConverged(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::NonConverged(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::NonConverged(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
