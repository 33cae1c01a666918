//! `specenc`: encode spectra, train and evaluate the reference models, and
//! run the gradient and parameter-count checks.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

mod checkpoint;
mod commands;
mod error;
mod report;
mod runspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliResult;
use report::Format;
use runspec::RunSpec;

#[derive(Parser)]
#[command(name = "specenc", version, about = "Mass spectrum encodings and reference regressors")]
struct Cli {
    /// Output format for tables and reports.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess and encode every spectrum into SPECTNSR files.
    Encode {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the synthetic generator seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one replicate per seed; write histories, checkpoints, summary.
    Train {
        #[arg(long)]
        spec: PathBuf,
        /// Replaces the run file's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of a checkpoint on a split of its training data.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Finite-difference gradient check of a toy model.
    Gradcheck {
        /// mlp, set_transformer, or gat.
        #[arg(long)]
        model: String,
        /// mlp: input,hidden..; set_transformer: block widths; gat: layers,channels.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Trainable parameter count per named tensor.
    Params {
        /// Default configuration of this model kind.
        #[arg(long)]
        model: Option<String>,
        /// Model section of a run spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// JSON model config file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<(String, bool)> {
    let ok = |s: String| Ok((s, true));
    match cli.command {
        Command::Encode { spec, seed, out } => ok(commands::encode(RunSpec::load(&spec)?, seed, out)?),
        Command::Train { spec, seed, out } => ok(commands::train(RunSpec::load(&spec)?, seed, out, cli.format)?),
        Command::Eval { checkpoint, split } => ok(commands::eval(&checkpoint, &split, cli.format)?),
        Command::Gradcheck { model, dims, seed, inject_fault } => {
            commands::gradcheck(&model, dims, seed, inject_fault, cli.format)
        }
        Command::Params { model, spec, config } => {
            ok(commands::params(model.as_deref(), spec.as_deref(), config.as_deref(), cli.format)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((out, passed)) => {
            print!("{out}");
            if passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: gradient check exceeded tolerance {}", commands::GRAD_TOL);
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
