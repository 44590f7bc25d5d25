//! `train`: fit a surrogate on every labeled shape in a dataset
//! directory and write a checkpoint.

use std::path::Path;

use alflow::io::write_model;
use alflow::surrogate::{init_model, train, ModelConfig, TrainConfig};

use crate::dataset::load_labeled;
use crate::CliResult;

pub fn run(
    dataset_dir: &Path,
    out: &Path,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> CliResult<()> {
    let dataset = load_labeled(dataset_dir)?;
    let samples: Vec<(&alflow::geometry::Shape, &alflow::oracle::VelocityField)> = dataset
        .iter()
        .map(|s| (s.shape.as_ref(), &s.truth))
        .collect();
    let model = init_model(model_cfg)?;
    let trained = train(&model, &samples, train_cfg)?;
    write_model(out, &trained)?;
    let final_loss = trained.train_log.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained on {} shapes for {} steps (final batch loss {final_loss:.6e}); wrote {}",
        samples.len(),
        train_cfg.steps,
        out.display()
    );
    Ok(())
}
