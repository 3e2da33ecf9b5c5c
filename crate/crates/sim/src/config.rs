//! TOML configuration. Keys mirror [`ExperimentConfig`]; every key is
//! optional and falls back to its default.
//!
//! ```toml
//! master_seed = 7
//! loads = [0.16, 0.32, 0.48, 0.64]
//! runs = 30
//! policies = ["pn_only", "fm_baseline", "nn_rel_change:0.02"]
//!
//! [playground]
//! noise_power_dbm = -130.0
//!
//! [narx]
//! hidden_nodes = 50
//! ```

use std::fs;
use std::path::Path;

use underlay_core::experiments::ExperimentConfig;

use crate::error::{Result, SimError};

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| SimError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Reads and validates a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| SimError::Config(format!("{}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| SimError::Config(e.to_string()))
}
