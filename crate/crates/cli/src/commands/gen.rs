//! `gen`: write a dataset of synthetic bifurcation shapes.

use std::path::Path;

use alflow::geometry::{generate_bifurcation, BifurcationParams, GeometryConfig};
use alflow::io::write_shape;
use alflow::math;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GenRanges;
use crate::dataset::sha256_file;
use crate::manifest::{DatasetEntry, DatasetManifest, MANIFEST_SCHEMA_VERSION};
use crate::{CliError, CliResult};

const TAG_PARAMS: u64 = 0x9e;
const TAG_POINTS: u64 = 0x51;

/// Parameters of the i-th shape of a dataset, drawn from the ranges.
/// The topology (straight tube, single-branch bend, or bifurcation) is
/// drawn first from the configured fractions.
pub fn draw_params(ranges: &GenRanges, dataset_seed: u64, index: usize) -> BifurcationParams {
    let mut rng = ChaCha8Rng::seed_from_u64(math::mix_seed(
        math::mix_seed(dataset_seed, TAG_PARAMS),
        index as u64,
    ));
    let span = |(lo, hi): (f64, f64), rng: &mut ChaCha8Rng| {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    };
    let topology: f64 = rng.gen_range(0.0..1.0);
    let parent_radius = span(ranges.parent_radius, &mut rng);
    let parent_length = span(ranges.parent_length, &mut rng);
    let child_lengths = (
        span(ranges.child_length, &mut rng),
        span(ranges.child_length, &mut rng),
    );
    let child_angles = (span(ranges.angle, &mut rng), span(ranges.angle, &mut rng));
    let asymmetry = span(ranges.asymmetry, &mut rng);
    let point_seed = math::mix_seed(math::mix_seed(dataset_seed, TAG_POINTS), index as u64);

    if topology < ranges.straight_fraction {
        BifurcationParams::straight_tube(parent_radius, parent_length, point_seed)
    } else if topology < ranges.straight_fraction + ranges.single_child_fraction {
        // One continuation branch of the parent caliber (a bend).
        BifurcationParams {
            parent_radius,
            parent_length,
            child_radii: (parent_radius, 0.0),
            child_lengths: (child_lengths.0, 0.0),
            child_angles: (child_angles.0, 0.0),
            seed: point_seed,
        }
    } else {
        BifurcationParams::murray(
            parent_radius,
            parent_length,
            child_lengths,
            child_angles,
            asymmetry,
            point_seed,
        )
        .expect("ranges validated")
    }
}

pub fn run(out_dir: &Path, count: usize, seed: u64, ranges: &GenRanges) -> CliResult<()> {
    ranges.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let cfg = GeometryConfig::with_counts(ranges.n_interior, ranges.n_wall, ranges.n_cap);

    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let params = draw_params(ranges, seed, i);
        let mut shape = generate_bifurcation(&params, &cfg).map_err(CliError::from)?;
        shape.id = format!("shape_{i:04}");
        let file = format!("{}.alfd", shape.id);
        let path = out_dir.join(&file);
        write_shape(&path, &shape, Some(&params))?;
        entries.push(DatasetEntry {
            id: shape.id,
            file,
            sha256: sha256_file(&path)?,
            seed: params.seed,
        });
    }

    DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed,
        ranges: ranges.clone(),
        entries,
    }
    .save(out_dir)?;
    println!("wrote {count} shapes to {}", out_dir.display());
    Ok(())
}
