//! `label`: produce one velocity file per shape file. Idempotent; skips
//! existing labels unless forced. A corrupt shape fails that file only,
//! the rest are still labeled, and the command exits nonzero.

use std::path::Path;

use alflow::io::{read_shape, write_velocity_field, VelocityTrailer};
use alflow::oracle::{LabelNoise, Oracle};
use anyhow::anyhow;

use crate::dataset::{label_path, shape_files};
use crate::{CliError, CliResult};

pub struct LabelOptions {
    pub inflow: f64,
    pub density: f64,
    pub viscosity: f64,
    pub noise_sigma: Option<f64>,
    pub noise_seed: u64,
    pub force: bool,
}

pub fn run(dataset_dir: &Path, opts: &LabelOptions) -> CliResult<()> {
    let files = shape_files(dataset_dir)?;
    if files.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no shape files to label",
            dataset_dir.display()
        )));
    }
    let constants = alflow::oracle::FluidConstants {
        density: opts.density,
        dynamic_viscosity: opts.viscosity,
    };
    constants.validate()?;
    let mut oracle = Oracle::new(constants, opts.inflow);
    if let Some(sigma) = opts.noise_sigma {
        oracle = oracle.with_noise(LabelNoise {
            sigma,
            seed: opts.noise_seed,
        });
    }

    let mut labeled = 0usize;
    let mut skipped = 0usize;
    let mut failures = Vec::new();
    for file in &files {
        let out = label_path(file);
        if out.exists() && !opts.force {
            skipped += 1;
            continue;
        }
        let labeled_one = (|| -> CliResult<()> {
            let (shape, _) = read_shape(file)?;
            // Stored labels are f32; quantize so in-memory and on-disk
            // fields match bitwise.
            let field = oracle.label(&shape)?.quantized();
            write_velocity_field(
                &out,
                &field,
                &VelocityTrailer {
                    shape_id: shape.id.clone(),
                    constants,
                    inflow: opts.inflow,
                },
            )?;
            Ok(())
        })();
        match labeled_one {
            Ok(()) => labeled += 1,
            Err(err) => {
                eprintln!("{}: {err}", file.display());
                failures.push(file.display().to_string());
            }
        }
    }

    println!("labeled {labeled}, skipped {skipped}, failed {}", failures.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow!(
            "failed to label {} file(s): {}",
            failures.len(),
            failures.join(", ")
        )))
    }
}
