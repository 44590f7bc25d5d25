//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime failure.

use std::path::PathBuf;

use alflow::surrogate::{ModelConfig, TrainConfig};
use clap::{Args, Parser, Subcommand};

use alflow_cli::commands;
use alflow_cli::config::GenRanges;
use alflow_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "alflow",
    version,
    about = "Active-learning experiments for flow-field surrogates on synthetic vessel point clouds"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Base seed for seeded commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores
    /// (env: ALFLOW_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overwrite outputs that already exist.
    #[arg(long, global = true, default_value_t = false)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of synthetic bifurcation shapes (.alfd).
    Gen {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of shapes.
        #[arg(long)]
        count: usize,
        /// JSON file with parameter ranges; defaults are desk-scale.
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Label every shape in a dataset directory (.alfv), idempotently.
    Label {
        #[arg(long)]
        dataset: PathBuf,
        /// Mean inlet speed, m/s.
        #[arg(long, default_value_t = 0.15)]
        inflow: f64,
        /// Fluid density, kg/m^3.
        #[arg(long, default_value_t = 1060.0)]
        density: f64,
        /// Dynamic viscosity, Pa*s.
        #[arg(long, default_value_t = 3.5e-3)]
        viscosity: f64,
        /// Optional Gaussian label-noise sigma, m/s.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Train a surrogate on all labeled shapes in a directory.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Output checkpoint (.alfm).
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file with a {"model": ..., "train": ...} object.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training steps (overrides the config file).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Predict a velocity field with a checkpointed model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        shape: PathBuf,
        /// Write the prediction to this .alfv path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score the prediction against this reference .alfv.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the configured active-learning experiment.
    AlRun {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize run logs into table/CDF/correlation CSV files.
    Report {
        /// ND-JSON run logs.
        logs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired Wilcoxon comparison of two strategies from run logs.
    Stats {
        /// ND-JSON run logs.
        logs: Vec<PathBuf>,
        #[arg(long)]
        strategy_a: String,
        #[arg(long)]
        strategy_b: String,
        /// approx_disp, cos_sim, continuity, or momentum.
        #[arg(long, default_value = "approx_disp")]
        metric: String,
        /// Labeled count to compare at; defaults to the largest present.
        #[arg(long)]
        labeled: Option<usize>,
        /// per-sample or per-repetition.
        #[arg(long, default_value = "per-sample")]
        pairing: String,
    },
}

#[derive(serde::Deserialize, Default)]
struct TrainFileConfig {
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

fn init_threads(requested: Option<usize>) -> CliResult<()> {
    let from_env = std::env::var("ALFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(threads) = requested.or(from_env) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_threads(cli.global.threads)?;
    match cli.command {
        Command::Gen { out, count, ranges } => {
            let ranges = match ranges {
                Some(path) => GenRanges::load(&path)?,
                None => GenRanges::default(),
            };
            commands::gen::run(&out, count, cli.global.seed, &ranges)
        }
        Command::Label {
            dataset,
            inflow,
            density,
            viscosity,
            noise_sigma,
        } => commands::label::run(
            &dataset,
            &commands::label::LabelOptions {
                inflow,
                density,
                viscosity,
                noise_sigma,
                noise_seed: cli.global.seed,
                force: cli.global.force,
            },
        ),
        Command::Train {
            dataset,
            out,
            config,
            steps,
        } => {
            let file_cfg: TrainFileConfig = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::validation(format!("{}: {e}", path.display()))
                    })?;
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
                }
                None => TrainFileConfig::default(),
            };
            let mut model_cfg = file_cfg.model.unwrap_or_default();
            model_cfg.seed = cli.global.seed;
            let mut train_cfg = file_cfg.train.unwrap_or_default();
            train_cfg.seed = cli.global.seed;
            if let Some(steps) = steps {
                train_cfg.steps = steps;
            }
            commands::train::run(&dataset, &out, &model_cfg, &train_cfg)
        }
        Command::Predict {
            model,
            shape,
            out,
            truth,
        } => commands::predict::run(&model, &shape, out.as_deref(), truth.as_deref()),
        Command::AlRun { config } => commands::al_run::run(&config).map(|_| ()),
        Command::Report { logs, out } => {
            if logs.is_empty() {
                return Err(CliError::validation("report needs at least one log"));
            }
            commands::report::run(&logs, &out)
        }
        Command::Stats {
            logs,
            strategy_a,
            strategy_b,
            metric,
            labeled,
            pairing,
        } => {
            if logs.is_empty() {
                return Err(CliError::validation("stats needs at least one log"));
            }
            let pairing = pairing.parse().map_err(CliError::Validation)?;
            commands::stats::run(&commands::stats::StatsArgs {
                logs,
                strategy_a,
                strategy_b,
                metric,
                labeled,
                pairing,
            })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("{err}");
        std::process::exit(err.exit_code());
    }
}
