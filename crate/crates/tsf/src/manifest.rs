//! Per-invocation run record: inputs, configuration hash, seed, outputs and
//! stage timestamps. The only artifact that carries wall-clock data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fsutil::write_json;

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub ticker: String,
    pub inputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub outputs: Vec<String>,
    pub stages: Vec<StageTime>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

/// SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("json value serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, ticker: &str, config: &C, seed: Option<u64>, output_dir: &Path) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ticker: ticker.to_string(),
            inputs: BTreeMap::new(),
            config_hash: config_hash(&config),
            config,
            seed,
            output_dir: output_dir.display().to_string(),
            outputs: Vec::new(),
            stages: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.display().to_string());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Runs `f`, recording its start and end time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let started_at = now();
        let out = f();
        self.stages.push(StageTime {
            stage: stage.to_string(),
            started_at,
            finished_at: now(),
        });
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// `<dir>/<stem>.run.json` next to a file artifact.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    artifact.with_extension("run.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_tracks_every_value() {
        let a = config_hash(&json!({"epochs": 25, "lookback": 60}));
        let b = config_hash(&json!({"lookback": 60, "epochs": 25}));
        let c = config_hash(&json!({"epochs": 26, "lookback": 60}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
