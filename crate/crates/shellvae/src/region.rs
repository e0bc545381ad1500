//! Region files: the clustering of a shell-transformed dataset, bound to the
//! dataset's content hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use shellvae_core::clustering::{feasible_region, kmeans, verify_identity};
use shellvae_core::{FeasibleRegion, KMeansConfig, ShellDataset, ShellParams};

use crate::dataset::Dataset;
use crate::error::{io_err, Error, Result};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub dataset_sha256: String,
    pub shell: ShellParams,
    pub shell_seed: u64,
    /// False when the data was clustered as given, without centering or the
    /// shell transform.
    #[serde(default = "yes")]
    pub shell_transform: bool,
    pub kmeans: KMeansConfig,
    /// `|TSS − W − δ| / TSS`
    pub identity_residual: f64,
    /// `W < δ_collapse`
    pub feasible: bool,
    pub region: FeasibleRegion,
}

impl RegionFile {
    /// Shell-transforms `dataset`, clusters it and computes the feasible region.
    pub fn compute(
        dataset: &Dataset,
        dataset_sha256: String,
        shell: ShellParams,
        shell_seed: u64,
        kmeans_config: KMeansConfig,
        shell_transform: bool,
    ) -> Result<(Self, ShellDataset)> {
        let shell_data = prepare(dataset, shell, shell_seed, shell_transform)?;
        let clustering = kmeans(&shell_data.data, &kmeans_config)?;
        let region = feasible_region(&shell_data.data, &clustering)?;
        let file = Self {
            dataset_sha256,
            shell,
            shell_seed,
            shell_transform,
            kmeans: kmeans_config,
            identity_residual: verify_identity(&region),
            feasible: region.is_nonempty() && region.w < region.delta_collapse,
            region,
        };
        Ok((file, shell_data))
    }

    /// Rebuilds the shell dataset this region was computed on, refusing a
    /// dataset whose hash differs from the recorded one.
    pub fn shell_dataset(&self, dataset: &Dataset, data_hash: &str, data_path: &Path) -> Result<ShellDataset> {
        if data_hash != self.dataset_sha256 {
            return Err(Error::FingerprintMismatch {
                data_path: data_path.to_path_buf(),
                region_hash: self.dataset_sha256.clone(),
                data_hash: data_hash.to_string(),
            });
        }
        let shell = prepare(dataset, self.shell, self.shell_seed, self.shell_transform)?;
        if self.region.clustering.assignments.len() != shell.data.rows() {
            return Err(Error::Core(shellvae_core::Error::AssignmentLength {
                expected: shell.data.rows(),
                got: self.region.clustering.assignments.len(),
            }));
        }
        Ok(shell)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        crate::binio::write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn prepare(dataset: &Dataset, shell: ShellParams, seed: u64, transform: bool) -> Result<ShellDataset> {
    if transform {
        return Ok(ShellDataset::from_raw(&dataset.data, shell, seed)?);
    }
    Ok(ShellDataset {
        data: dataset.data.clone(),
        params: shell,
        original_mean: vec![0.0; dataset.data.cols()],
        shell_draws: Vec::new(),
    })
}
