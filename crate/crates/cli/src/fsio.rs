//! File access shared by the commands: atomic writes, digests, datasets.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use ttrank_core::nn::Dataset;

use crate::error::{CliError, CliResult};

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    // temporary files are created owner-only; keep an existing file's mode
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = fs::metadata(path)
            .map(|m| m.permissions())
            .unwrap_or_else(|_| fs::Permissions::from_mode(0o644));
        tmp.as_file()
            .set_permissions(perms)
            .map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `base` with `suffix` appended to its file name: `model.ttrz` + `.trace`.
pub fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn read_dataset(path: &Path, classes: Option<usize>) -> CliResult<Dataset> {
    let bytes = read_bytes(path)?;
    Dataset::read_csv(&bytes[..], classes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn dataset_csv(data: &Dataset) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    Ok(buf)
}
