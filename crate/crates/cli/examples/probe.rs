//! Scratch probe for tuning desk-scale defaults. Not part of the crate.

use std::sync::Arc;
use std::time::Instant;

use alflow::engine::{run_experiment, Dataset, ExperimentConfig, LabeledSample, QueryConfig};
use alflow::geometry::{generate_bifurcation, GeometryConfig};
use alflow::math;
use alflow::oracle::{FluidConstants, Oracle};
use alflow::queries::StrategyTag;
use alflow::surrogate::{ModelConfig, TrainConfig};
use alflow_cli::config::GenRanges;

fn main() {
    let steps: usize = std::env::var("STEPS").ok().and_then(|s| s.parse().ok()).unwrap_or(600);
    let width: usize = std::env::var("WIDTH").ok().and_then(|s| s.parse().ok()).unwrap_or(32);
    let n_total: usize = 160;
    let test_count = 64;
    let seeds: Vec<u64> = vec![0, 1, 2, 3, 4];

    let ranges = GenRanges::default();
    let cfg = GeometryConfig::with_counts(ranges.n_interior, ranges.n_wall, ranges.n_cap);
    let oracle = Oracle::new(FluidConstants::default(), 0.15);

    let t0 = Instant::now();
    let samples: Vec<LabeledSample> = (0..n_total)
        .map(|i| {
            let params = alflow_cli::commands::gen::draw_params(&ranges, 42, i);
            let mut shape = generate_bifurcation(&params, &cfg).unwrap();
            shape.id = format!("shape_{i:04}");
            let truth = oracle.label(&shape).unwrap().quantized();
            LabeledSample { shape: Arc::new(shape), truth }
        })
        .collect();
    let dataset = Dataset::new(samples).unwrap();
    println!("dataset: {} shapes in {:.1}s", dataset.len(), t0.elapsed().as_secs_f64());

    let ids = dataset.ids();
    let (test_ids, unlabeled_ids) = ids.split_at(test_count);

    let which = std::env::var("STRATEGIES").unwrap_or_else(|_| "random,gv,qbc,pa".into());
    let strategies: Vec<StrategyTag> = which.split(',').map(|s| s.parse().unwrap()).collect();
    for strategy in strategies {
        let config = ExperimentConfig {
            strategy,
            initial_labeled: 2,
            schedule: vec![4, 8, 16, 32],
            seeds: seeds.clone(),
            model: ModelConfig {
                hidden_widths: vec![width, width],
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
                learning_rate: std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(3e-4),
                lr_decay: std::env::var("DECAY").ok().and_then(|s| s.parse().ok()).unwrap_or(0.9989),
                direction_weight: 1.0,
                seed: 0,
            },
            query: QueryConfig::default(),
            fluid: FluidConstants::default(),
            warm_start: false,
        };
        let t = Instant::now();
        let runs = run_experiment(&config, &dataset, unlabeled_ids, test_ids).unwrap();
        let elapsed = t.elapsed().as_secs_f64();

        // Median disparity per round pooled over reps x test samples.
        let rounds = runs[0].len();
        let mut line = format!("{strategy}: {elapsed:.0}s medians");
        for r in 0..rounds {
            let pooled: Vec<f64> = runs
                .iter()
                .flat_map(|rep| rep[r].per_sample.iter().map(|s| s.approx_disparity))
                .collect();
            line += &format!(" {:.3}", math::median(&pooled));
        }
        println!("{line}");

        if strategy == StrategyTag::Pa {
            let mut rhos = Vec::new();
            for rep in &runs {
                let diag = rep.last().unwrap().query.as_ref().unwrap();
                let rho = alflow::engine::spearman(&diag.scores, &diag.true_disparity).unwrap();
                rhos.push(rho);
            }
            println!(
                "pa spearman per seed: {:?} median {:.3}",
                rhos.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                math::median(&rhos)
            );
        }
    }
    println!("total {:.0}s", t0.elapsed().as_secs_f64());
}
