//! Run manifests: enough to re-run an artifact-producing command and check
//! that it reproduces its outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> CliResult<Self> {
        let data = fsio::read_bytes(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: fsio::sha256_hex(&data),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Working directory the relative paths in `argv` refer to.
    pub cwd: PathBuf,
    /// Fully resolved settings.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub version: String,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    /// Where the manifest for a run with this first output lives.
    pub fn path_for(first_output: &Path) -> PathBuf {
        fsio::sibling(first_output, ".manifest.json")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fsio::write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = fsio::read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Io(format!("{}: not a run manifest: {e}", path.display())))
    }
}
