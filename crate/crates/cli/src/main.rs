//! `markerloc` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, EstimateOverrides};

#[derive(Debug, Parser)]
#[command(
    name = "markerloc",
    version,
    about = "Marker-based LiDAR/IMU vehicle localization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scenario: marker library, IMU and LiDAR logs, ground truth.
    Simulate {
        /// Scenario file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the estimator over recorded logs and write a trajectory CSV.
    Estimate {
        /// Run file (TOML) naming the logs and the start pose.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trajectory.csv (default: the run file's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Initial heading in degrees, overriding the run file.
        #[arg(long, allow_hyphen_values = true)]
        yaw0: Option<f64>,
        /// Minimum reflectivity (0-255) for a return to count as marker tape.
        #[arg(long)]
        reflectivity_threshold: Option<u8>,
        /// Cluster time window in milliseconds.
        #[arg(long)]
        cluster_ms: Option<f64>,
    },
    /// Compare a trajectory CSV with a ground-truth CSV.
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Directory for report.csv and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the velocity and pose estimators on random scenes.
    Bench {
        #[arg(long, default_value_t = 141_600)]
        iterations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            println!("{}", commands::cmd_simulate(&config, &out, seed)?);
        }
        Command::Estimate {
            config,
            out,
            yaw0,
            reflectivity_threshold,
            cluster_ms,
        } => {
            let overrides = EstimateOverrides {
                yaw0_deg: yaw0,
                reflectivity_threshold,
                cluster_ms,
            };
            let (summary, warnings) = commands::cmd_estimate(&config, out.as_deref(), overrides)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            println!("{summary}");
        }
        Command::Evaluate {
            estimates,
            truth,
            out,
        } => print!(
            "{}",
            commands::cmd_evaluate(&estimates, &truth, out.as_deref())?
        ),
        Command::Bench {
            iterations,
            seed,
            out,
        } => print!("{}", commands::cmd_bench(iterations, seed, out.as_deref())?),
    }
    Ok(())
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
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
