use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use underlay_core::experiments::ExperimentConfig;

use crate::error::{Result, SimError};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Run record written before any output and rewritten on completion.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub tool_version: String,
    pub output_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub outputs: Vec<String>,
    pub best_epoch: Option<usize>,
    pub best_val_mse: Option<f64>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn begin(command: &str, config_path: Option<&Path>, config: &ExperimentConfig, out: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            config: config.clone(),
            master_seed: config.master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            output_dir: out.to_path_buf(),
            started_at: now(),
            finished_at: None,
            outputs: Vec::new(),
            best_epoch: None,
            best_val_mse: None,
        }
    }

    pub fn write(&self) -> Result<()> {
        let path = self.output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|e| SimError::io(path, e))
    }

    pub fn finish(&mut self) -> Result<()> {
        self.finished_at = Some(now());
        self.write()
    }
}
