//! `palp`: command-line front end of the PCM simulator.
//!
//! Exit status is 0 on success, 1 on user error (bad flags, config or
//! trace) and 2 when a command stream breaks the device rules.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Overrides;
use palp_core::scheduler::Policy;
use palp_core::sim::SimError;

#[derive(Debug, Parser)]
#[command(name = "palp", version, about = "Cycle-level PCM memory simulator with partition-level parallelism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// JSON config file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// baseline_fcfs, multipartition or palp.
    #[arg(long)]
    policy: Option<Policy>,
    /// Trace file to simulate instead of a synthetic trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Seed for the synthetic trace.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RAPL limit in pJ/access.
    #[arg(long)]
    rapl: Option<f64>,
    /// Backlogging threshold.
    #[arg(long)]
    thb: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            policy: self.policy,
            trace: self.trace.clone(),
            seed: self.seed,
            out: self.out.clone(),
            rapl: self.rapl,
            thb: self.thb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    #[value(name = "rapl_limit", alias = "rapl")]
    RaplLimit,
    #[value(name = "th_b", alias = "thb")]
    ThB,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write report.json, report.csv and commands.txt.
    Simulate(Common),
    /// Run one simulation per parameter value and write a merged sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values, e.g. 0.2,0.3,0.4.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write a synthetic trace.
    GenTrace {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        requests: Option<usize>,
        #[arg(long)]
        read_fraction: Option<f64>,
        #[arg(long)]
        bank_locality: Option<f64>,
        #[arg(long)]
        partition_spread: Option<f64>,
        #[arg(long)]
        inter_arrival: Option<f64>,
        #[arg(long)]
        write_thinning: Option<f64>,
        output: PathBuf,
    },
    /// Print the bank-conflict histogram of a trace as CSV.
    Classify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Count an older same-bank request within this many cycles, instead
        /// of the default first-come first-served coexistence rule.
        #[arg(long)]
        window: Option<u64>,
        /// Also write classify.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a command-stream file against the device rules.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        stream: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(c.config.as_deref(), &c.overrides()),
        Command::Sweep { common, param, values } => {
            commands::sweep(common.config.as_deref(), &common.overrides(), param, &values)
        }
        Command::GenTrace {
            config,
            seed,
            requests,
            read_fraction,
            bank_locality,
            partition_spread,
            inter_arrival,
            write_thinning,
            output,
        } => {
            let knobs = commands::SyntheticOverrides {
                request_count: requests,
                read_fraction,
                bank_locality,
                partition_spread,
                inter_arrival,
                write_thinning,
            };
            commands::gen_trace(config.as_deref(), seed, &knobs, &output)
        }
        Command::Classify {
            config,
            trace,
            seed,
            window,
            out,
        } => commands::classify(config.as_deref(), trace, seed, window, out.as_deref()),
        Command::Verify { config, stream } => commands::verify(config.as_deref(), &stream),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<SimError>() {
                Some(SimError::Legality(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
