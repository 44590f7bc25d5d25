//! Dataset directory handling: shape/label file discovery, loading into
//! the engine's sample store, and checksums.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use alflow::engine::{Dataset, LabeledSample};
use alflow::io as alfio;
use anyhow::{anyhow, Context};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const SHAPE_EXT: &str = "alfd";
pub const LABEL_EXT: &str = "alfv";

/// Shape files in a dataset directory, sorted by file name.
pub fn shape_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(CliError::validation(format!(
            "{}: not a directory",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(SHAPE_EXT))
        .collect();
    files.sort();
    Ok(files)
}

/// Sibling label path of a shape file: same stem, `.alfv`.
pub fn label_path(shape_file: &Path) -> PathBuf {
    shape_file.with_extension(LABEL_EXT)
}

/// Loads every shape and its label into a sorted dataset.
pub fn load_labeled(dir: &Path) -> CliResult<Dataset> {
    let files = shape_files(dir)?;
    if files.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no .{SHAPE_EXT} files found",
            dir.display()
        )));
    }
    let mut samples = Vec::with_capacity(files.len());
    for file in &files {
        let (shape, _) = alfio::read_shape(file)
            .with_context(|| format!("reading {}", file.display()))
            .map_err(CliError::Runtime)?;
        let lpath = label_path(file);
        if !lpath.exists() {
            return Err(CliError::validation(format!(
                "{}: missing label file (run `alflow label` first)",
                lpath.display()
            )));
        }
        let (field, trailer) = alfio::read_velocity_field(&lpath)
            .with_context(|| format!("reading {}", lpath.display()))
            .map_err(CliError::Runtime)?;
        if trailer.shape_id != shape.id {
            return Err(CliError::Runtime(anyhow!(
                "{}: label belongs to shape '{}', expected '{}'",
                lpath.display(),
                trailer.shape_id,
                shape.id
            )));
        }
        field.check_alignment(&shape)?;
        samples.push(LabeledSample {
            shape: Arc::new(shape),
            truth: field,
        });
    }
    Ok(Dataset::new(samples)?)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Combined checksum over (file name, file checksum) pairs in sorted
/// order; stable id for a dataset directory's contents.
pub fn combined_checksum(pairs: &[(String, String)]) -> String {
    let mut sorted = pairs.to_vec();
    sorted.sort();
    let mut hasher = Sha256::new();
    for (name, sum) in sorted {
        hasher.update(name.as_bytes());
        hasher.update(b":");
        hasher.update(sum.as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
