//! `pointfuse` command-line tool.

mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "pointfuse",
    version,
    about = "Fuse gaze, head pose and finger pointing to select in-vehicle AOIs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic dataset.
    Generate,
    /// Interpolate, normalize and translate a dataset into the seat frame.
    Preprocess,
    /// Train one model on all drivers and save it.
    Train,
    /// Predict every sample of a dataset with a saved model.
    Predict,
    /// Leave-one-driver-out cross-validation.
    Eval,
    /// Cross-validation for every modality and class subset.
    Ablate,
    /// Time single-sample inference of saved models.
    Bench,
    /// Rank AOIs against a direction vector.
    Match,
    /// Render CSV tables and SVG plots from report files.
    Report,
}

fn run(command: Command, cfg: RunConfig) -> CliResult<()> {
    let cfg = cfg.resolve()?;
    let written = match command {
        Command::Generate => commands::generate(&cfg),
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Train => commands::train_cmd(&cfg),
        Command::Predict => commands::predict(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Ablate => commands::ablate(&cfg),
        Command::Bench => commands::bench(&cfg),
        Command::Match => commands::match_cmd(&cfg),
        Command::Report => commands::report(&cfg),
    }?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command, cli.config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
