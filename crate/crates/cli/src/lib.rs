//! `pdbench` command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid flags, config or inputs, 2 for
//! failures while reading data or computing results.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod analyze;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod niqe;
pub mod rank;
pub mod study;
pub mod synth;

use config::{layer, ConfigFile};
use error::Result;

#[derive(Parser, Debug)]
#[command(name = "pdbench", version, about = "Perception-distortion super-resolution benchmark")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed recorded in every output and used by randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score super-resolved outputs against ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Rank submissions per region.
    Rank(rank::RankArgs),
    /// Train or apply the NIQE pristine model.
    #[command(subcommand)]
    Niqe(niqe::NiqeCommand),
    /// Plan, serve and aggregate a human rating study.
    #[command(subcommand)]
    Study(study::StudyCommand),
    /// Correlate quality measures with study scores.
    Analyze(analyze::AnalyzeArgs),
    /// Generate a toy benchmark of identity, blurred and noisy outputs.
    Synth(synth::SynthArgs),
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let file_seed = match &cfg {
        Some(c) => c.seed()?,
        None => None,
    };
    let seed = cli.seed.or(file_seed).unwrap_or(0);
    let cfg = cfg.as_ref();
    match cli.command {
        Command::Evaluate(mut a) => {
            layer(&mut a, cfg, &["evaluate"])?;
            evaluate::run(a, seed)
        }
        Command::Rank(mut a) => {
            layer(&mut a, cfg, &["rank"])?;
            rank::run(a, seed)
        }
        Command::Niqe(niqe::NiqeCommand::Train(mut a)) => {
            layer(&mut a, cfg, &["niqe", "train"])?;
            niqe::train(a, seed)
        }
        Command::Niqe(niqe::NiqeCommand::Score(mut a)) => {
            layer(&mut a, cfg, &["niqe", "score"])?;
            niqe::score(a, seed)
        }
        Command::Study(study::StudyCommand::Plan(mut a)) => {
            layer(&mut a, cfg, &["study", "plan"])?;
            study::plan(a, seed)
        }
        Command::Study(study::StudyCommand::Serve(mut a)) => {
            layer(&mut a, cfg, &["study", "serve"])?;
            study::serve(a, seed)
        }
        Command::Study(study::StudyCommand::Report(mut a)) => {
            layer(&mut a, cfg, &["study", "report"])?;
            study::report_cmd(a, seed)
        }
        Command::Analyze(mut a) => {
            layer(&mut a, cfg, &["analyze"])?;
            analyze::run(a, seed)
        }
        Command::Synth(mut a) => {
            layer(&mut a, cfg, &["synth"])?;
            synth::run(a, seed)
        }
    }
}
