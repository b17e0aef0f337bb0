use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use super::{emit, Outcome};
use crate::container::{describe, Payload};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub input: PathBuf,
}

pub fn run(a: &InfoArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let payload = Payload::read(&a.input)?;
    let size = std::fs::metadata(&a.input)
        .map_err(|e| CliError::io(&a.input, e))?
        .len();
    for line in describe(&payload) {
        emit(out, line)?;
    }
    emit(out, format!("file size: {size} bytes"))?;
    Ok(Outcome::default())
}
