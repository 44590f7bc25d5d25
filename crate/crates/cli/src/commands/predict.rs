//! `predict`: run a checkpointed model on a shape, optionally writing
//! the prediction and scoring it against a reference label.

use std::path::Path;

use alflow::engine::{approx_disparity, cos_similarity};
use alflow::io::{read_model, read_shape, read_velocity_field, write_velocity_field, VelocityTrailer};
use alflow::surrogate::forward;

use crate::CliResult;

pub fn run(
    model_path: &Path,
    shape_path: &Path,
    out: Option<&Path>,
    truth: Option<&Path>,
) -> CliResult<()> {
    let model = read_model(model_path)?;
    let (shape, _) = read_shape(shape_path)?;
    let pred = forward(&model, &shape, None)?;

    if let Some(out) = out {
        write_velocity_field(
            out,
            &pred.quantized(),
            &VelocityTrailer {
                shape_id: shape.id.clone(),
                constants: alflow::oracle::FluidConstants::default(),
                inflow: f64::NAN,
            },
        )?;
        println!("wrote prediction to {}", out.display());
    }

    if let Some(truth_path) = truth {
        let (truth_field, _) = read_velocity_field(truth_path)?;
        let disparity = approx_disparity(&pred, &truth_field)?;
        let cosine = cos_similarity(&pred, &truth_field)?;
        println!("approx_disparity {disparity:.6e}");
        println!("cos_similarity {cosine:.6e}");
    }
    Ok(())
}
