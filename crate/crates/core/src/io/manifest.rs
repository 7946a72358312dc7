use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;

/// Hex SHA-256 of `key=value` lines in key order, so the digest ignores
/// the order keys were written in.
pub fn config_digest(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    for (k, v) in cfg.canonical_pairs() {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub wall_clock_secs: f64,
    /// Command-specific parameters (input path, horizon, ...).
    pub parameters: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> Self {
        RunManifest {
            command: command.to_owned(),
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_digest: config_digest(cfg),
            seeds,
            wall_clock_secs: 0.0,
            parameters: BTreeMap::new(),
            config: cfg.canonical_pairs().into_iter().collect(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
