//! `rndcnn`: train, evaluate, predict and gradient-check the reference CNN.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Scope;
use config::{Overrides, RunConfig};
use exit::Failure;

#[derive(Parser)]
#[command(name = "rndcnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset root (class-per-directory tree) or manifest CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, split and train; writes checkpoints, history.csv and summary.txt.
    Train {
        #[command(flatten)]
        common: Common,
        /// Square input side in pixels.
        #[arg(long)]
        input_size: Option<usize>,
        #[arg(long, value_parser = ["xavier", "zero", "uniform"])]
        init: Option<String>,
        #[arg(long)]
        no_augment: bool,
        #[arg(long)]
        no_class_weights: bool,
    },
    /// Evaluate a checkpoint on a labelled set; writes report.txt, report.csv and roc.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print the predicted class and probability row for each image as CSV.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Finite-difference check of every backward pass.
    Gradcheck {
        #[arg(long, value_enum, default_value = "layer")]
        scope: Scope,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input side for `--scope model`.
        #[arg(long, default_value_t = 32)]
        input_size: usize,
        /// Negate conv kernel gradients; the check must then fail.
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

fn resolve(common: Common, extra: Overrides) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    Ok(cfg.apply(Overrides {
        data: common.data,
        out: common.out,
        seed: common.seed,
        ..extra
    }))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train {
            common,
            input_size,
            init,
            no_augment,
            no_class_weights,
        } => {
            let cfg = resolve(
                common,
                Overrides {
                    input_size,
                    init,
                    no_augment,
                    no_class_weights,
                    ..Default::default()
                },
            )?;
            commands::train(cfg)
        }
        Command::Evaluate { common, checkpoint } => commands::evaluate_cmd(resolve(common, Overrides::default())?, &checkpoint),
        Command::Predict { checkpoint, images } => commands::predict(&checkpoint, &images),
        Command::Gradcheck {
            scope,
            seed,
            input_size,
            corrupt_backward,
        } => commands::gradcheck(scope, seed, input_size, corrupt_backward),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
