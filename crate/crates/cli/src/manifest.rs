//! Run manifests and the output directories they describe.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command: its name, the fully resolved
/// arguments, and digests of what went in and came out.
///
/// The output directory and thread count are deliberately absent, so a
/// replay elsewhere writes an identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_schema: u32,
    pub seed: Option<u64>,
    pub args: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_config: Option<serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Core(twophase::Error::FileNotFound(path.to_path_buf())),
        _ => CliError::from(e),
    })?;
    Ok(FileDigest {
        path: path.to_string_lossy().into_owned(),
        sha256: sha256_hex(&bytes),
    })
}

/// Absolute form of an input path; fails if the file does not exist.
pub fn resolve_input(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Core(twophase::Error::FileNotFound(path.to_path_buf())),
        _ => CliError::from(e),
    })
}

/// Collects the files a command writes, in write order.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` listing every output so far.
    pub fn finish(self, mut manifest: Manifest) -> CliResult<Manifest> {
        manifest.outputs = self.written;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST_NAME), bytes)?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Core(twophase::Error::FileNotFound(path.to_path_buf())),
        _ => CliError::from(e),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
