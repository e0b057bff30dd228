//! JSON run manifest written next to every command's outputs: the config as
//! parsed, the effective seed, and a sha256 per artifact. Nothing in it
//! depends on wall-clock time, so reruns produce identical manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<Artifact>,
}

#[derive(Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        Self {
            tool: "qtms",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn echo_config(&mut self, entries: &[(String, String, String)]) {
        for (section, key, value) in entries {
            self.config.insert(format!("{section}.{key}"), value.clone());
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.outputs.push(Artifact {
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            sha256: hex,
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        std::fs::write(&path, json + "\n")?;
        Ok(path)
    }
}
