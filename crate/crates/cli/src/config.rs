//! Run configuration: a single JSON document that pins everything needed
//! to byte-reproduce an experiment.

use std::path::{Path, PathBuf};

use alflow::engine::{ExperimentConfig, QueryConfig};
use alflow::oracle::FluidConstants;
use alflow::queries::StrategyTag;
use alflow::surrogate::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Top-level `al-run` configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub strategies: Vec<StrategyTag>,
    /// Number of dataset shapes (first in sorted id order) held out as
    /// the test pool; the rest form the unlabeled pool.
    pub test_count: usize,
    pub initial_labeled: usize,
    pub schedule: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub query: QueryConfig,
    #[serde(default)]
    pub fluid: FluidConstants,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("{}: cannot read config: {e}", path.display()))
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!("{}: {e}", path.display()))
        })?;
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> CliResult<()> {
        let field_err = |field: &str, msg: String| {
            CliError::validation(format!("{}: {field}: {msg}", path.display()))
        };
        if self.strategies.is_empty() {
            return Err(field_err("strategies", "must not be empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.strategies {
            if !seen.insert(s) {
                return Err(field_err("strategies", format!("duplicate entry '{s}'")));
            }
        }
        if self.test_count == 0 {
            return Err(field_err("test_count", "must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(field_err("seeds", "must not be empty".into()));
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&k| k == 0) {
            return Err(field_err(
                "schedule",
                "must be non-empty with positive entries".into(),
            ));
        }
        if self.initial_labeled == 0 {
            return Err(field_err("initial_labeled", "must be positive".into()));
        }
        self.model
            .validate()
            .map_err(|e| field_err("model", e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| field_err("train", e.to_string()))?;
        self.fluid
            .validate()
            .map_err(|e| field_err("fluid", e.to_string()))?;
        Ok(())
    }

    /// Engine configuration for one strategy of this run.
    pub fn experiment(&self, strategy: StrategyTag) -> ExperimentConfig {
        ExperimentConfig {
            strategy,
            initial_labeled: self.initial_labeled,
            schedule: self.schedule.clone(),
            seeds: self.seeds.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            query: self.query.clone(),
            fluid: self.fluid,
            warm_start: self.warm_start,
        }
    }
}

/// Parameter ranges for the dataset generator, sampled uniformly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenRanges {
    pub parent_radius: (f64, f64),
    pub parent_length: (f64, f64),
    pub child_length: (f64, f64),
    pub asymmetry: (f64, f64),
    /// Branch angle from the parent axis, radians.
    pub angle: (f64, f64),
    /// Fraction of shapes generated as straight tubes (no children).
    #[serde(default = "default_straight_fraction")]
    pub straight_fraction: f64,
    /// Fraction generated as single-branch bends (one child, same caliber).
    #[serde(default = "default_single_child_fraction")]
    pub single_child_fraction: f64,
    pub n_interior: usize,
    pub n_wall: usize,
    pub n_cap: usize,
}

fn default_straight_fraction() -> f64 {
    0.2
}

fn default_single_child_fraction() -> f64 {
    0.2
}

impl Default for GenRanges {
    fn default() -> Self {
        Self {
            parent_radius: (1.4e-3, 2.2e-3),
            parent_length: (5e-3, 16e-3),
            child_length: (3e-3, 12e-3),
            asymmetry: (0.4, 1.0),
            angle: (0.25, 1.3),
            straight_fraction: default_straight_fraction(),
            single_child_fraction: default_single_child_fraction(),
            n_interior: 256,
            n_wall: 128,
            n_cap: 32,
        }
    }
}

impl GenRanges {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("{}: cannot read ranges: {e}", path.display()))
        })?;
        let ranges: GenRanges = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        ranges.validate()?;
        Ok(ranges)
    }

    pub fn validate(&self) -> CliResult<()> {
        let check = |name: &str, (lo, hi): (f64, f64), positive: bool| -> CliResult<()> {
            if !(lo <= hi) || (positive && lo <= 0.0) {
                return Err(CliError::validation(format!(
                    "ranges.{name}: invalid interval ({lo}, {hi})"
                )));
            }
            Ok(())
        };
        check("parent_radius", self.parent_radius, true)?;
        check("parent_length", self.parent_length, true)?;
        check("child_length", self.child_length, true)?;
        check("asymmetry", self.asymmetry, true)?;
        check("angle", self.angle, true)?;
        if !(0.0..=1.0).contains(&self.straight_fraction)
            || !(0.0..=1.0).contains(&self.single_child_fraction)
            || self.straight_fraction + self.single_child_fraction > 1.0
        {
            return Err(CliError::validation(
                "ranges: topology fractions must be in [0, 1] and sum to at most 1",
            ));
        }
        if self.asymmetry.1 > 1.0 {
            return Err(CliError::validation(
                "ranges.asymmetry: upper bound must be <= 1",
            ));
        }
        if self.angle.1 >= std::f64::consts::FRAC_PI_2 {
            return Err(CliError::validation(
                "ranges.angle: upper bound must be < pi/2",
            ));
        }
        if self.n_interior == 0 || self.n_wall == 0 || self.n_cap == 0 {
            return Err(CliError::validation(
                "ranges: point counts must be positive",
            ));
        }
        Ok(())
    }
}
