//! `magpose`: generate synthetic joint data, train the LSTM or the fusion
//! filter, evaluate, run the spike comparison, and stream-filter CSV.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 incompatible artifact version.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{EvalTarget, LoadedModel, ModelKind};
use config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "magpose", version, about = "Magnetic ball-and-socket joint pose estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one config key (repeatable), e.g. `--set n_steps=2000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?,
            ),
            None => None,
        };
        Ok(RunConfig::resolve(text.as_deref(), &self.overrides, self.seed)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write train/val/test CSV plus dataset.meta.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a generated dataset directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Dataset directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a model on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present_any = ["oracle", "identity"])]
        model_file: Option<PathBuf>,
        /// Expected kind of `--model-file`.
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        /// Debug: score the ground truth itself.
        #[arg(long, conflicts_with_all = ["model_file", "identity"])]
        oracle: bool,
        /// Debug: score the identity rotation.
        #[arg(long, conflicts_with = "model_file")]
        identity: bool,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
        split: String,
    },
    /// Inject sensor spikes and compare peak deviations of both models.
    Spike {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lstm: PathBuf,
        #[arg(long)]
        dvbf: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
        split: String,
    },
    /// Stream dataset CSV rows from stdin to pose rows on stdout.
    Filter {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
    },
    /// Print stored eval and spike summaries.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => commands::generate(&common.resolve()?, &common.out),
        Command::Train { common, model, data } => commands::train(&common.resolve()?, model, &data, &common.out),
        Command::Eval {
            common,
            model_file,
            model,
            oracle,
            identity,
            data,
            split,
        } => {
            let target = match model_file {
                Some(p) => EvalTarget::File(p, model),
                None if oracle => EvalTarget::Oracle,
                None => {
                    debug_assert!(identity);
                    EvalTarget::Identity
                }
            };
            commands::eval(&common.resolve()?, &target, &data, &split, &common.out)
        }
        Command::Spike {
            common,
            lstm,
            dvbf,
            data,
            split,
        } => commands::spike(&common.resolve()?, &lstm, &dvbf, &data, &split, &common.out),
        Command::Filter { model_file, model } => {
            let loaded = LoadedModel::load(&model_file, model)?;
            let (_, skipped) = commands::filter(
                &loaded,
                std::io::stdin().lock(),
                std::io::stdout().lock(),
                std::io::stderr().lock(),
            )
            .context(describe(&model_file))?;
            if skipped > 0 {
                eprintln!("{skipped} malformed rows skipped");
            }
            Ok(())
        }
        Command::Report { paths } => commands::report(&paths, std::io::stdout().lock()),
    }
}

fn describe(path: &Path) -> String {
    format!("filtering with {}", path.display())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use magpose_core::Error;
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Version { .. }) => 4,
        Some(Error::InvalidConfig(_)) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
