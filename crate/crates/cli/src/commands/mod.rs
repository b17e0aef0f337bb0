//! Argument definitions and dispatch for every subcommand.

mod compress;
mod decompose;
mod generate;
mod info;
mod network;
mod round;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ttrank",
    version,
    about = "Tensor-train decomposition, rank reduction and TT network training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// TT-decompose a dense container.
    Decompose(decompose::DecomposeArgs),
    /// Round a TT container to smaller ranks.
    Round(round::RoundArgs),
    /// Reduce TT-ranks by Riemannian gradient descent.
    Compress(compress::CompressArgs),
    /// Train a network built from a config, or continue training a saved one.
    Train(network::TrainArgs),
    /// Reduce the TT-ranks of a trained network, then fine-tune it.
    BuildLr(network::BuildLrArgs),
    /// Print loss (and accuracy) of a network on a dataset.
    Evaluate(network::EvaluateArgs),
    /// Random-init versus low-rank-init small networks over several seeds.
    Compare(network::CompareArgs),
    /// Describe a container.
    Info(info::InfoArgs),
    /// Write synthetic tensors, operators or datasets.
    #[command(subcommand)]
    Generate(generate::GenerateCommand),
    /// Re-run the command recorded in a manifest and check its outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A `.manifest.json` written by an earlier run.
    pub manifest: PathBuf,
}

/// What an artifact-producing command read and wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Fully resolved settings, recorded in the manifest.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Set when outputs were written but a checked inequality failed.
    pub violation: Option<String>,
}

/// Runs one command, printing its report to `out`.
pub fn execute(cmd: &Command, out: &mut dyn Write) -> CliResult<Outcome> {
    match cmd {
        Command::Decompose(a) => decompose::run(a, out),
        Command::Round(a) => round::run(a, out),
        Command::Compress(a) => compress::run(a, out),
        Command::Train(a) => network::train(a, out),
        Command::BuildLr(a) => network::build_lr(a, out),
        Command::Evaluate(a) => network::evaluate(a, out),
        Command::Compare(a) => network::compare(a, out),
        Command::Info(a) => info::run(a, out),
        Command::Generate(g) => generate::run(g, out),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

pub(crate) fn emit(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::Io(format!("writing report: {e}")))
}

pub(crate) fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
