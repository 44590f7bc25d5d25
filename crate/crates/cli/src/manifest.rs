//! Dataset and run manifests: enough provenance to reproduce any output
//! byte for byte (timestamps aside).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::GenRanges;
use crate::{CliError, CliResult};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const DATASET_MANIFEST: &str = "manifest.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub file: String,
    pub sha256: String,
    pub seed: u64,
}

/// Written by `gen` next to the shape files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub ranges: GenRanges,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(DATASET_MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self).map_err(anyhow::Error::new)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::validation(format!("{}: cannot read manifest: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Written by `al-run` into the output directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub artifact_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Full configuration snapshot; with the dataset checksum this is
    /// sufficient to reproduce the logs.
    pub config: serde_json::Value,
    pub dataset_checksum: String,
    /// Residual means are evaluated on interior points only.
    pub residual_points: String,
    /// Initial pools are a function of the repetition seed alone, so
    /// strategies sharing a seed are paired.
    pub initial_pools_paired_by_seed: bool,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(RUN_MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self).map_err(anyhow::Error::new)?)?;
        Ok(())
    }
}
