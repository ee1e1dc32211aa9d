use std::path::PathBuf;
use std::process::ExitCode;

use cbf_synth_cli::{check_degree, run_simulation, synthesize, CliError, ConfigFile, SimulateOptions};
use clap::{Args, Parser, Subcommand};

/// Synthesize and check control barrier functions for output constraints.
#[derive(Parser)]
#[command(name = "cbf-synth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the sampling plans.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the relative-degree conditions of the output.
    CheckDegree(Common),
    /// Run every hypothesis check, build the candidate and verify it.
    Synthesize(Common),
    /// Simulate the filtered closed loop.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV; a plot script is written next to it.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON summary path (defaults to --out, then stdout).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Apply the nominal controller unfiltered.
        #[arg(long)]
        no_filter: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::CheckDegree(c) => {
            let cfg = ConfigFile::load(&c.config)?;
            check_degree(&cfg, c.seed, c.out.as_deref()).map(drop)
        }
        Command::Synthesize(c) => {
            let cfg = ConfigFile::load(&c.config)?;
            synthesize(&cfg, c.seed, c.out.as_deref()).map(drop)
        }
        Command::Simulate {
            common,
            csv,
            summary,
            dt,
            horizon,
            no_filter,
        } => {
            let cfg = ConfigFile::load(&common.config)?;
            let opts = SimulateOptions {
                seed: common.seed,
                dt,
                horizon,
                no_filter,
                csv,
                summary: summary.or(common.out),
            };
            run_simulation(&cfg, &opts).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cbf-synth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
