//! `al-run`: execute the configured active-learning experiment for every
//! strategy, writing one ND-JSON log per (strategy, repetition) plus a
//! run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use alflow::engine::run_experiment;
use chrono::{SecondsFormat, Utc};

use crate::config::RunConfig;
use crate::dataset::{combined_checksum, load_labeled, sha256_file, shape_files};
use crate::manifest::{FileEntry, RunManifest, MANIFEST_SCHEMA_VERSION};
use crate::{CliError, CliResult};

pub fn log_file_name(strategy: &str, repetition: usize) -> String {
    format!("log_{strategy}_rep{repetition}.ndjson")
}

pub fn run(config_path: &Path) -> CliResult<Vec<PathBuf>> {
    let config = RunConfig::load(config_path)?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);

    let dataset = load_labeled(&config.dataset_dir)?;
    if config.test_count >= dataset.len() {
        return Err(CliError::validation(format!(
            "test_count {} leaves no unlabeled pool (dataset has {} shapes)",
            config.test_count,
            dataset.len()
        )));
    }
    let ids = dataset.ids();
    let (test_ids, unlabeled_ids) = ids.split_at(config.test_count);

    // Fail fast on budget before any training starts.
    for strategy in &config.strategies {
        config
            .experiment(*strategy)
            .validate(unlabeled_ids.len())
            .map_err(|e| CliError::validation(format!("{}: {e}", config_path.display())))?;
    }

    std::fs::create_dir_all(&config.out_dir)?;
    let mut files = Vec::new();
    let mut written = Vec::new();
    for strategy in &config.strategies {
        let experiment = config.experiment(*strategy);
        let runs = run_experiment(&experiment, &dataset, unlabeled_ids, test_ids)?;
        for (rep, records) in runs.iter().enumerate() {
            let name = log_file_name(&strategy.to_string(), rep);
            let path = config.out_dir.join(&name);
            let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for record in records {
                serde_json::to_writer(&mut w, record).map_err(anyhow::Error::new)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            files.push(FileEntry {
                path: name,
                sha256: sha256_file(&path)?,
            });
            written.push(path);
        }
        println!(
            "strategy {strategy}: {} repetitions, {} rounds each",
            runs.len(),
            runs.first().map_or(0, Vec::len)
        );
    }

    let dataset_checksum = {
        let mut pairs = Vec::new();
        for file in shape_files(&config.dataset_dir)? {
            let name = file
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            pairs.push((name, sha256_file(&file)?));
            let label = crate::dataset::label_path(&file);
            if label.exists() {
                let name = label
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                pairs.push((name, sha256_file(&label)?));
            }
        }
        combined_checksum(&pairs)
    };

    let config_value = serde_json::to_value(&config).map_err(anyhow::Error::new)?;
    let run_id = crate::dataset::hex_digest(
        format!("{dataset_checksum}:{config_value}").as_bytes(),
    );
    RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        run_id,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        config: config_value,
        dataset_checksum,
        residual_points: "interior".to_string(),
        initial_pools_paired_by_seed: true,
        files,
    }
    .save(&config.out_dir)?;
    println!("run complete; logs in {}", config.out_dir.display());
    Ok(written)
}
