use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lnn_core::LnnError;
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;

/// Record of one CLI run, written next to its outputs.
///
/// Only deterministic quantities go in here, so that rerunning with the same
/// flags reproduces the file byte for byte. Wall-clock timing is logged instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub outputs: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            config,
            inputs: BTreeMap::new(),
            seed,
            outputs: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.inputs.insert(name.to_owned(), path.display().to_string());
        self
    }

    pub fn output(&mut self, name: &str, path: &Path) -> &mut Self {
        self.outputs.insert(name.to_owned(), path.display().to_string());
        self
    }

    pub fn count(&mut self, name: &str, value: usize) -> &mut Self {
        self.counters.insert(name.to_owned(), value as u64);
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(LnnError::from)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(LnnError::from)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| LnnError::Schema(format!("manifest {}: {e}", path.display())))?;
        Ok(manifest)
    }

    pub fn input_path(&self, name: &str) -> Option<PathBuf> {
        self.inputs.get(name).map(PathBuf::from)
    }
}
