//! JSON manifest of one run. The only place a timestamp is written.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, GraphSpec};
use crate::output::{sha256_hex, Artifact};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheStats {
    pub dir: String,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub created_unix: u64,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<Artifact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheStats>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<Timing>,
}

/// Digests of the canonical config and of any input file it names.
pub fn input_digests(cfg: &ExperimentConfig) -> Result<Vec<InputDigest>> {
    let mut out = vec![InputDigest {
        name: "config".into(),
        sha256: sha256_hex(cfg.canonical().as_bytes()),
    }];
    if let GraphSpec::EdgeList(path) = &cfg.graph {
        let bytes = std::fs::read(path).with_context(|| format!("reading edge list {}", path.display()))?;
        out.push(InputDigest {
            name: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    Ok(out)
}

impl Manifest {
    pub fn new(subcommand: &str, cfg: &ExperimentConfig, artifacts: Vec<Artifact>, cache: Option<CacheStats>) -> Result<Self> {
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed: cfg.seed,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            inputs: input_digests(cfg)?,
            artifacts,
            cache,
            timings: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.subcommand));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
