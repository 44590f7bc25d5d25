//! Scratch probe: anatomy of the PA score vs true error at one round.

use std::sync::Arc;

use alflow::engine::{run_experiment, spearman, Dataset, ExperimentConfig, LabeledSample, QueryConfig};
use alflow::geometry::{generate_bifurcation, GeometryConfig};
use alflow::math;
use alflow::oracle::{FluidConstants, Oracle};
use alflow::queries::StrategyTag;
use alflow::surrogate::{ModelConfig, TrainConfig};
use alflow_cli::config::GenRanges;

fn main() {
    let steps: usize = std::env::var("STEPS").ok().and_then(|s| s.parse().ok()).unwrap_or(1200);
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let ranges = GenRanges::default();
    let cfg = GeometryConfig::with_counts(ranges.n_interior, ranges.n_wall, ranges.n_cap);
    let oracle = Oracle::new(FluidConstants::default(), 0.15);
    let mut radii = std::collections::HashMap::new();
    let samples: Vec<LabeledSample> = (0..160)
        .map(|i| {
            let params = alflow_cli::commands::gen::draw_params(&ranges, 42, i);
            let mut shape = generate_bifurcation(&params, &cfg).unwrap();
            shape.id = format!("shape_{i:04}");
            radii.insert(shape.id.clone(), params.parent_radius);
            let truth = oracle.label(&shape).unwrap().quantized();
            LabeledSample { shape: Arc::new(shape), truth }
        })
        .collect();
    let dataset = Dataset::new(samples).unwrap();
    let ids = dataset.ids();
    let (test_ids, unlabeled_ids) = ids.split_at(64);

    let config = ExperimentConfig {
        strategy: StrategyTag::Pa,
        initial_labeled: 2,
        schedule: vec![4, 8, 16, 32],
        seeds: vec![0],
        model: ModelConfig {
            hidden_widths: vec![32, 32],
            dropout_rate: 0.1,
            global_context: true,
            feature_mode: alflow::geometry::FeatureMode::VectorOffset,
            fourier_features: std::env::var("RFF").ok().and_then(|s| s.parse().ok()).unwrap_or(0),
            fourier_scale: std::env::var("RFF_SCALE").ok().and_then(|s| s.parse().ok()).unwrap_or(2.0),
            seed: 0,
        },
        train: TrainConfig {
            steps,
            batch_shapes: 2,
            learning_rate: lr,
            lr_decay: 0.999,
            direction_weight: 1.0,
            seed: 0,
        },
        query: QueryConfig::default(),
        fluid: FluidConstants::default(),
        warm_start: false,
    };
    let runs = run_experiment(&config, &dataset, unlabeled_ids, test_ids).unwrap();
    for record in &runs[0] {
        if let Some(diag) = &record.query {
            let rho = spearman(&diag.scores, &diag.true_disparity).unwrap();
            let r_vec: Vec<f64> = diag.candidate_ids.iter().map(|id| radii[id]).collect();
            let rho_score_radius = spearman(&diag.scores, &r_vec).unwrap();
            let rho_disp_radius = spearman(&diag.true_disparity, &r_vec).unwrap();
            println!(
                "round {} (labeled {}): n={} rho(score,disp)={rho:.3} rho(score,R)={rho_score_radius:.3} rho(disp,R)={rho_disp_radius:.3}",
                record.round,
                record.labeled_count,
                diag.scores.len()
            );
            println!(
                "  disp: min {:.3} med {:.3} max {:.3} | score: min {:.3} med {:.3} max {:.3}",
                diag.true_disparity.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
                math::median(&diag.true_disparity),
                diag.true_disparity.iter().fold(0.0f64, |a, &b| a.max(b)),
                diag.scores.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
                math::median(&diag.scores),
                diag.scores.iter().fold(0.0f64, |a, &b| a.max(b)),
            );
        }
    }
}
