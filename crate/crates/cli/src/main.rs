//! `cosy`: simulate multi-view scenes, reconstruct them, score the result.

mod eval;
mod report;
mod simulate;
mod solve;

use std::path::Path;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cosy", version, about = "Multi-view multi-object 6D pose scene reconstruction")]
struct Cli {
    /// Worker threads for the parallel stages; all cores when omitted.
    /// Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: models.json, observations.json, ground_truth.json.
    Simulate(simulate::Args),
    /// Match candidates across views and refine the scene; writes estimate.json.
    Solve(solve::Args),
    /// Score an estimate against ground truth; writes a metric report.
    Eval(eval::Args),
    /// Print a human-readable summary of files produced by the other commands.
    Report(report::Args),
}

/// Failures mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files. Exit 2.
    Config(String),
    /// Solve found no physical object. Exit 3.
    NoScene(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NoScene(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::NoScene(m) => write!(f, "no scene: {m}"),
        }
    }
}

impl From<cosy::scene_io::SceneIoError> for CliError {
    fn from(e: cosy::scene_io::SceneIoError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub fn config_err(m: impl std::fmt::Display) -> CliError {
    CliError::Config(m.to_string())
}

/// Paths are echoed exactly as given.
pub fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        let pool = (n > 0)
            .then(|| rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok())
            .flatten();
        if pool.is_none() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Solve(a) => solve::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Report(a) => report::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
