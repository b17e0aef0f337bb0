//! Command-line front end for the `ttrank-core` tensor-train library.
//!
//! Subcommands decompose dense tensors, round and compress TT tensors, and
//! train, reduce and evaluate TT networks. Tensors and networks are stored in
//! the `TTRZ1` container ([`container`]); every artifact-producing command
//! writes a [`manifest::RunManifest`] that `ttrank replay` re-runs.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or corrupt input, 4 numerical
//! failure, 5 a checked inequality was violated.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod fsio;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;

use commands::{execute, Cli, Command, ReplayArgs};
use error::{CliError, CliResult};
use manifest::{FileRecord, RunManifest};

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Replay(a) => replay(a, out),
        cmd => run_recorded(cmd, argv, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run_recorded(cmd: &Command, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let outcome = execute(cmd, out)?;
    if let Some(first) = outcome.outputs.first() {
        let cwd = std::env::current_dir().map_err(|e| CliError::Io(format!("working directory: {e}")))?;
        let m = RunManifest {
            command: argv.first().cloned().unwrap_or_default(),
            argv,
            cwd,
            config: outcome.config,
            seed: outcome.seed,
            inputs: outcome
                .inputs
                .iter()
                .map(|p| FileRecord::of(p))
                .collect::<CliResult<_>>()?,
            outputs: outcome
                .outputs
                .iter()
                .map(|p| FileRecord::of(p))
                .collect::<CliResult<_>>()?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_secs: started,
            wall_clock_secs: clock.elapsed().as_secs_f64(),
        };
        m.write(&RunManifest::path_for(first))?;
    }
    match outcome.violation {
        Some(v) => Err(CliError::BoundViolation(v)),
        None => Ok(()),
    }
}

/// Re-runs a recorded command and checks every output byte for byte.
fn replay(a: &ReplayArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = RunManifest::read(&a.manifest)?;
    if std::env::current_dir().ok().as_deref() != Some(m.cwd.as_path()) {
        std::env::set_current_dir(&m.cwd).map_err(|e| CliError::io(&m.cwd, e))?;
    }
    for rec in &m.inputs {
        if FileRecord::of(&rec.path)? != *rec {
            return Err(CliError::Io(format!(
                "{}: input changed since the recorded run",
                rec.path.display()
            )));
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("ttrank".to_string()).chain(m.argv.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot record a replay".into()));
    }
    let mut sink = Vec::new();
    let outcome = execute(&cli.command, &mut sink)?;
    let mut diverged = Vec::new();
    for rec in &m.outputs {
        if FileRecord::of(&rec.path)? != *rec {
            diverged.push(rec.path.display().to_string());
        }
    }
    if outcome.outputs.len() != m.outputs.len() {
        diverged.push(format!(
            "{} outputs instead of {}",
            outcome.outputs.len(),
            m.outputs.len()
        ));
    }
    if !diverged.is_empty() {
        return Err(CliError::Numerical(format!("replay diverged: {}", diverged.join(", "))));
    }
    commands::emit(out, format!("replayed: {}", m.argv.join(" ")))?;
    commands::emit(out, format!("outputs identical: {}", m.outputs.len()))
}
