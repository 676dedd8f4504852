//! `mrl`: simulate sessions, sweep step sizes, run group experiments,
//! analyse and replay event logs, and serve the live session API.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrl_core::{CatalogKind, GroupAssignment};

/// Exit status for a log that does not replay.
pub const EXIT_REPLAY_MISMATCH: u8 = 3;
const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mrl", version, about = "Adaptive reinforcer selection: simulation, analysis and serving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $MRL_LOG_DIR, else ./mrl-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<CatalogKind>,
    /// Write 0 for every event timestamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamps: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one session and write its event log.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        group: Option<GroupAssignment>,
    },
    /// Average entropy trajectories over seeds for each step size.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.015, 0.05, 0.07])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 30)]
        seeds: usize,
    },
    /// Run the none/random/learned group comparison.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = GroupAssignment::ALL)]
        groups: Vec<GroupAssignment>,
        #[arg(long, default_value_t = 30)]
        subjects: usize,
    },
    /// Replay a log and write entropy/regret series and statistics.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
    },
    /// Verify that every session in a log replays exactly.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
    },
    /// Start the HTTP session service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = mrl_service::DEFAULT_PORT)]
        port: u16,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Run { common, group } => commands::run(&common, group),
        Command::Sweep { common, alphas, seeds } => commands::sweep(&common, &alphas, seeds),
        Command::Experiment { common, groups, subjects } => commands::experiment(&common, &groups, subjects),
        Command::Analyze { common, log } => commands::analyze(&common, &log),
        Command::Replay { log, .. } => commands::replay(&log),
        Command::Serve { common, port } => commands::serve(&common, port),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
