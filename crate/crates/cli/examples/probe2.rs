//! Scratch probe: single-model quality ceiling on the full pool.

use std::sync::Arc;
use std::time::Instant;

use alflow::engine::{approx_disparity, cos_similarity, Dataset, LabeledSample};
use alflow::geometry::{generate_bifurcation, GeometryConfig};
use alflow::math;
use alflow::oracle::{FluidConstants, Oracle};
use alflow::surrogate::{forward, init_model, train, ModelConfig, TrainConfig};
use alflow_cli::config::GenRanges;

fn main() {
    let steps: usize = std::env::var("STEPS").ok().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let width: usize = std::env::var("WIDTH").ok().and_then(|s| s.parse().ok()).unwrap_or(32);
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let decay: f64 = std::env::var("DECAY").ok().and_then(|s| s.parse().ok()).unwrap_or(0.9989);
    let train_n: usize = std::env::var("TRAIN_N").ok().and_then(|s| s.parse().ok()).unwrap_or(96);

    let mut ranges = GenRanges::default();
    if std::env::var("WIDE").is_ok() {
        ranges.parent_radius = (0.8e-3, 3.0e-3);
        ranges.parent_length = (5e-3, 16e-3);
        ranges.child_length = (3e-3, 12e-3);
        ranges.asymmetry = (0.4, 1.0);
        ranges.angle = (0.25, 1.3);
    }
    let cfg = GeometryConfig::with_counts(ranges.n_interior, ranges.n_wall, ranges.n_cap);
    let oracle = Oracle::new(FluidConstants::default(), 0.15);
    let posed = std::env::var("POSE").is_ok();
    let samples: Vec<LabeledSample> = (0..160)
        .map(|i| {
            let params = alflow_cli::commands::gen::draw_params(&ranges, 42, i);
            let mut shape = generate_bifurcation(&params, &cfg).unwrap();
            shape.id = format!("shape_{i:04}");
            let mut truth = oracle.label(&shape).unwrap().quantized();
            if posed {
                let rot = rotation_from_seed(1000 + i as u64);
                let apply = |v: [f64; 3]| -> [f64; 3] {
                    let mut out = [0.0; 3];
                    for r in 0..3 {
                        out[r] = rot[r][0] * v[0] + rot[r][1] * v[1] + rot[r][2] * v[2];
                    }
                    out
                };
                let points: Vec<[f64; 3]> = shape
                    .points
                    .iter()
                    .map(|p| alflow::math::quantize_vec3(apply(*p)))
                    .collect();
                let mut centerline = shape.centerline.clone();
                for seg in &mut centerline {
                    seg.start = apply(seg.start);
                    seg.end = apply(seg.end);
                }
                shape =
                    alflow::geometry::Shape::new(shape.id, points, shape.roles, centerline)
                        .unwrap();
                truth = alflow::oracle::VelocityField::new(
                    truth.values.iter().map(|v| apply(*v)).collect(),
                )
                .quantized();
            }
            LabeledSample { shape: Arc::new(shape), truth }
        })
        .collect();
    let dataset = Dataset::new(samples).unwrap();
    let ids = dataset.ids();
    let (test_ids, pool_ids) = ids.split_at(64);

    let train_samples: Vec<(&alflow::geometry::Shape, &alflow::oracle::VelocityField)> = pool_ids
        [..train_n]
        .iter()
        .map(|id| {
            let s = dataset.get(id).unwrap();
            (s.shape.as_ref(), &s.truth)
        })
        .collect();

    let model_cfg = ModelConfig {
        hidden_widths: vec![width, width],
        dropout_rate: std::env::var("DROPOUT").ok().and_then(|s| s.parse().ok()).unwrap_or(0.1),
        global_context: std::env::var("GLOBAL").map(|v| v != "0").unwrap_or(true),
        feature_mode: alflow::geometry::FeatureMode::VectorOffset,
        fourier_features: std::env::var("RFF").ok().and_then(|s| s.parse().ok()).unwrap_or(0),
        fourier_scale: std::env::var("RFF_SCALE").ok().and_then(|s| s.parse().ok()).unwrap_or(2.0),
        seed: 1,
    };
    let tcfg = TrainConfig {
        steps,
        batch_shapes: 2,
        learning_rate: lr,
        lr_decay: decay,
        direction_weight: 1.0,
        seed: 2,
    };
    let t = Instant::now();
    let model = init_model(&model_cfg).unwrap();
    let trained = train(&model, &train_samples, &tcfg).unwrap();
    let train_time = t.elapsed().as_secs_f64();

    let head = math::mean(&trained.train_log[..50.min(trained.train_log.len())]);
    let tail = math::mean(&trained.train_log[trained.train_log.len().saturating_sub(50)..]);

    let mut disp = Vec::new();
    let mut cos = Vec::new();
    for id in test_ids {
        let s = dataset.get(id).unwrap();
        let pred = forward(&trained, &s.shape, None).unwrap();
        disp.push(approx_disparity(&pred, &s.truth).unwrap());
        cos.push(cos_similarity(&pred, &s.truth).unwrap());
    }
    println!(
        "steps={steps} width={width} lr={lr} decay={decay} train_n={train_n}: \
         {train_time:.0}s loss {head:.3}->{tail:.3} | test disp median {:.3} mean {:.3} | cos median {:.3}",
        math::median(&disp),
        math::mean(&disp),
        math::median(&cos)
    );
}

// Pose experiment helper: uniform random rotation from a seed.
pub fn rotation_from_seed(seed: u64) -> [[f64; 3]; 3] {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // Random unit quaternion.
    let u1: f64 = rng.gen_range(0.0..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}
