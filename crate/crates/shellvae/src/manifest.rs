use serde::{Deserialize, Serialize};
use shellvae_core::train::RegionSnapshot;
use shellvae_core::{Seeds, ShellParams};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun a training or ablation invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub dataset_sha256: String,
    pub region: RegionSnapshot,
    pub shell: ShellParams,
    pub k: usize,
    pub seeds: Vec<Seeds>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(
        command: &str,
        dataset_sha256: &str,
        region: RegionSnapshot,
        shell: ShellParams,
        k: usize,
        seeds: Vec<Seeds>,
        config: serde_json::Value,
    ) -> Self {
        Self {
            tool: "shellvae".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            dataset_sha256: dataset_sha256.into(),
            region,
            shell,
            k,
            seeds,
            config,
        }
    }
}
