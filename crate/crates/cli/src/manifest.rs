use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mbpuf_core::crp::digest_bytes;
use serde::{Deserialize, Serialize};

use crate::args::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to regenerate a run's outputs: the full invocation
/// with defaults filled in, plus digests of what it read and wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Tracks file reads and writes of one command.
#[derive(Debug, Default)]
pub struct Io {
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Io {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: digest_bytes(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: digest_bytes(bytes),
        });
        Ok(())
    }
}

/// `<out>.manifest.json`, or `<dir>/manifest.json` for directory outputs.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

impl Manifest {
    pub fn new(invocation: Command, io: Io) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            inputs: io.inputs,
            outputs: io.outputs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a valid manifest", path.display()))
    }

    /// Fails if any recorded input no longer has its recorded digest.
    pub fn check_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let bytes = fs::read(&input.path)
                .with_context(|| format!("recorded input {} is missing", input.path.display()))?;
            if digest_bytes(&bytes) != input.sha256 {
                bail!("recorded input {} has changed since the run", input.path.display());
            }
        }
        Ok(())
    }
}
