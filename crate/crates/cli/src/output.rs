//! Output-directory handling, atomic writes, and the per-invocation run
//! manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUT_ENV_VAR: &str = "ICRLAB_OUT";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Every file a command emits goes through this; nothing is written
/// outside the resolved directory.
pub struct OutDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl OutDir {
    pub fn resolve(flag: Option<PathBuf>) -> Self {
        let root = flag
            .or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("icrlab-out"));
        Self {
            root,
            outputs: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `name` (a path relative to the out dir) atomically:
    /// write-temp-then-rename in the destination directory.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let dest = self.root.join(name);
        let parent = dest.parent().expect("output path has a parent");
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", parent.display())))?;
        let file_name = dest.file_name().expect("output path has a file name");
        let tmp = parent.join(format!(".tmp-{}", file_name.to_string_lossy()));
        fs::write(&tmp, contents)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &dest)
            .map_err(|e| CliError::Config(format!("cannot rename to {}: {e}", dest.display())))?;
        self.outputs.push(name.to_string());
        Ok(dest)
    }

    /// Writes the run manifest recording the command, its config hash, and
    /// every file produced. Call last.
    pub fn finish(mut self, command: &str, config_hash: &str) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            outputs: std::mem::take(&mut self.outputs),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let json = to_pretty_json(&manifest)?;
        self.write(RUN_MANIFEST_FILE, &json)?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub tool_version: String,
}

/// Stable hash of a command's resolved configuration: SHA-256 over the
/// command name and the config's canonical JSON. Identical invocations
/// produce identical hashes on any machine.
pub fn config_hash<T: Serialize>(command: &str, config: &T) -> Result<String, CliError> {
    let json = serde_json::to_string(config)
        .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\0");
    hasher.update(json.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))
}
