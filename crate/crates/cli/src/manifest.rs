//! Run manifest: the reproducibility envelope written alongside every
//! command's outputs. Re-running a command from the resolved configuration
//! and seed in a manifest reproduces the outputs bit-identically for the
//! same tool version (timestamps excepted).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use kzmsim_core::RunConfig;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub resolved_config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// Command-specific resolved quantities (e.g. gamma, omega_crit).
    #[serde(skip_serializing_if = "serde_json::Map::is_empty", default)]
    pub resolved: serde_json::Map<String, serde_json::Value>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<PathBuf>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: "kzmsim".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            resolved_config: config.clone(),
            seed: None,
            master_seed: None,
            resolved: serde_json::Map::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.resolved.insert(key.to_string(), value.into());
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Finalize and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix_ms = now_ms();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::runtime(format!("writing '{}': {e}", path.display())))?;
        Ok(path)
    }
}
