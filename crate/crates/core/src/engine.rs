//! Pool-based active-learning driver and evaluation metrics.
//!
//! A run starts from a few randomly labeled samples and repeatedly: ranks
//! the unlabeled pool with the configured strategy, reveals labels for
//! the top k (counted against the oracle budget), retrains the surrogate
//! from scratch, and evaluates on the held-out test pool. Repetitions
//! differ only in their seed; the initial draw depends on the seed alone,
//! so strategies sharing a seed start from the same pool and stay
//! pairwise comparable.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffops::DEFAULT_KNN;
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::math;
use crate::oracle::{FluidConstants, VelocityField};
use crate::queries::{
    self, DistanceMatrix, GraphCache, QueryResult, StrategyTag, DEFAULT_CHAMFER_SUBSAMPLE,
    DEFAULT_COMMITTEE, DEFAULT_NS_LAMBDA,
};
use crate::surrogate::{forward, init_model, train, ModelConfig, SurrogateModel, TrainConfig};

// Sub-seed tags, one per independent random stream.
const TAG_INITIAL_DRAW: u64 = 0x11;
const TAG_MODEL_INIT: u64 = 0x22;
const TAG_TRAIN: u64 = 0x33;
const TAG_QUERY: u64 = 0x44;

/// Schema version stamped on every serialized round record.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// One dataset entry: a shape and its withheld ground-truth field.
#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub shape: Arc<Shape>,
    pub truth: VelocityField,
}

/// The full sample store, sorted by id. Ground truth lives here but is
/// only revealed to the learner through [`PoolState`].
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(mut samples: Vec<LabeledSample>) -> Result<Self> {
        samples.sort_by(|a, b| a.shape.id.cmp(&b.shape.id));
        for pair in samples.windows(2) {
            if pair[0].shape.id == pair[1].shape.id {
                return Err(Error::InvalidParams(format!(
                    "duplicate shape id '{}' in dataset",
                    pair[0].shape.id
                )));
            }
        }
        for s in &samples {
            s.truth.check_alignment(&s.shape)?;
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.shape.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Result<&LabeledSample> {
        self.samples
            .binary_search_by(|s| s.shape.id.as_str().cmp(id))
            .map(|i| &self.samples[i])
            .map_err(|_| Error::UnknownId(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledSample> {
        self.samples.iter()
    }
}

/// Labeled / unlabeled / test partition with revealed-label storage and
/// the oracle-call budget counter.
#[derive(Clone, Debug)]
pub struct PoolState {
    labeled: BTreeSet<String>,
    unlabeled: BTreeSet<String>,
    test: BTreeSet<String>,
    revealed: BTreeMap<String, VelocityField>,
    oracle_calls: u64,
}

impl PoolState {
    /// Builds the pool partition. Test labels are stored up front and do
    /// not count against the oracle budget.
    pub fn new(dataset: &Dataset, unlabeled: &[String], test: &[String]) -> Result<Self> {
        let unlabeled_set: BTreeSet<String> = unlabeled.iter().cloned().collect();
        let test_set: BTreeSet<String> = test.iter().cloned().collect();
        if unlabeled_set.len() != unlabeled.len() || test_set.len() != test.len() {
            return Err(Error::InvalidParams("duplicate ids in pool split".into()));
        }
        if let Some(id) = unlabeled_set.intersection(&test_set).next() {
            return Err(Error::InvalidParams(format!(
                "id '{id}' assigned to both unlabeled and test pools"
            )));
        }
        let mut revealed = BTreeMap::new();
        for id in &test_set {
            revealed.insert(id.clone(), dataset.get(id)?.truth.clone());
        }
        for id in &unlabeled_set {
            dataset.get(id)?;
        }
        Ok(Self {
            labeled: BTreeSet::new(),
            unlabeled: unlabeled_set,
            test: test_set,
            revealed,
            oracle_calls: 0,
        })
    }

    /// Moves an unlabeled id into the labeled pool, storing its field and
    /// incrementing the oracle budget.
    pub fn reveal(&mut self, id: &str, field: VelocityField) -> Result<()> {
        if !self.unlabeled.remove(id) {
            return Err(Error::UnknownId(id.to_string()));
        }
        self.labeled.insert(id.to_string());
        self.revealed.insert(id.to_string(), field);
        self.oracle_calls += 1;
        Ok(())
    }

    pub fn labeled_ids(&self) -> Vec<String> {
        self.labeled.iter().cloned().collect()
    }

    pub fn unlabeled_ids(&self) -> Vec<String> {
        self.unlabeled.iter().cloned().collect()
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.test.iter().cloned().collect()
    }

    pub fn revealed_field(&self, id: &str) -> Result<&VelocityField> {
        self.revealed
            .get(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// Pairwise disjointness of the three id sets.
    pub fn check_disjoint(&self) -> Result<()> {
        for (a, b, what) in [
            (&self.labeled, &self.unlabeled, "labeled/unlabeled"),
            (&self.labeled, &self.test, "labeled/test"),
            (&self.unlabeled, &self.test, "unlabeled/test"),
        ] {
            if let Some(id) = a.intersection(b).next() {
                return Err(Error::InvalidParams(format!(
                    "pool overlap ({what}): id '{id}'"
                )));
            }
        }
        Ok(())
    }
}

/// Query-strategy knobs shared by the experiment driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub chamfer_subsample: usize,
    pub committee_members: usize,
    /// Momentum weight in the physics-adherence score.
    pub lambda: f64,
    pub knn_k: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            chamfer_subsample: DEFAULT_CHAMFER_SUBSAMPLE,
            committee_members: DEFAULT_COMMITTEE,
            lambda: DEFAULT_NS_LAMBDA,
            knn_k: DEFAULT_KNN,
        }
    }
}

/// Full specification of one active-learning experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategy: StrategyTag,
    pub initial_labeled: usize,
    pub schedule: Vec<usize>,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub query: QueryConfig,
    pub fluid: FluidConstants,
    /// Continue training from the previous round's parameters instead of
    /// reinitializing.
    pub warm_start: bool,
}

impl ExperimentConfig {
    pub fn validate(&self, n_unlabeled: usize) -> Result<()> {
        if self.initial_labeled == 0 {
            return Err(Error::InvalidParams("initial_labeled must be positive".into()));
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParams(
                "schedule must be non-empty with positive entries".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParams("at least one seed is required".into()));
        }
        let budget: usize = self.initial_labeled + self.schedule.iter().sum::<usize>();
        if budget > n_unlabeled {
            return Err(Error::InvalidParams(format!(
                "schedule needs {budget} labels but the unlabeled pool has {n_unlabeled}"
            )));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.fluid.validate()?;
        Ok(())
    }

    pub fn repetitions(&self) -> usize {
        self.seeds.len()
    }
}

/// mean and sample standard deviation of a metric over the test pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: math::mean(values),
            std: math::sample_std(values),
        }
    }
}

/// Metrics of one test sample under the current model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub approx_disparity: f64,
    pub cos_similarity: f64,
    pub continuity: f64,
    pub momentum: f64,
}

/// Aggregated test metrics of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub approx_disparity: MetricSummary,
    pub cos_similarity: MetricSummary,
    pub continuity: MetricSummary,
    pub momentum: MetricSummary,
    /// Total degenerate MLS fits over the test evaluations.
    pub degenerate_fits: u64,
}

/// Query scores on the unlabeled pool together with the model's true
/// error there. The true error is diagnostic only (it peeks at withheld
/// labels) and never counts against the oracle budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryDiagnostics {
    pub candidate_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub true_disparity: Vec<f64>,
}

/// Provenance record of one active-learning round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub schema_version: u32,
    pub strategy: StrategyTag,
    pub repetition: usize,
    pub seed: u64,
    /// 0 = the initial model; rounds 1.. follow the schedule.
    pub round: usize,
    /// Ids added this round (the initial draw at round 0).
    pub selected_ids: Vec<String>,
    pub labeled_count: usize,
    pub oracle_calls: u64,
    pub test_metrics: TestMetrics,
    pub per_sample: Vec<SampleMetrics>,
    pub query: Option<QueryDiagnostics>,
    pub wall_clock_s: f64,
}

/// Relative L2 error sqrt(sum ||pred - gt||^2 / sum ||gt||^2).
pub fn approx_disparity(pred: &VelocityField, gt: &VelocityField) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            field: pred.len(),
            points: gt.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.values.iter().zip(&gt.values) {
        num += math::dist2(*p, *t);
        den += math::norm2(*t);
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}

/// Mean per-point cosine similarity; pairs with a zero vector on either
/// side contribute 0.
pub fn cos_similarity(pred: &VelocityField, gt: &VelocityField) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            field: pred.len(),
            points: gt.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, t) in pred.values.iter().zip(&gt.values) {
        let np = math::norm(*p);
        let nt = math::norm(*t);
        if np > 0.0 && nt > 0.0 {
            total += math::dot(*p, *t) / (np * nt);
        }
    }
    Ok(total / pred.len() as f64)
}

/// Evaluates a model over labeled samples: accuracy versus ground truth
/// plus Navier-Stokes residuals of the predictions.
pub fn evaluate(
    model: &SurrogateModel,
    samples: &[&LabeledSample],
    constants: &FluidConstants,
    graphs: &GraphCache,
) -> Result<(Vec<SampleMetrics>, TestMetrics)> {
    let rows: Vec<(SampleMetrics, u64)> = samples
        .par_iter()
        .map(|sample| {
            let pred = forward(model, &sample.shape, None)?;
            let res = match graphs.get(&sample.shape.id) {
                Some(cache) => {
                    crate::diffops::ns_residuals_cached(&sample.shape, &pred, constants, cache)?
                }
                None => crate::diffops::ns_residuals(&sample.shape, &pred, constants)?,
            };
            Ok((
                SampleMetrics {
                    id: sample.shape.id.clone(),
                    approx_disparity: approx_disparity(&pred, &sample.truth)?,
                    cos_similarity: cos_similarity(&pred, &sample.truth)?,
                    continuity: res.continuity,
                    momentum: res.momentum,
                },
                res.degenerate_fits as u64,
            ))
        })
        .collect::<Result<_>>()?;
    let degenerate: u64 = rows.iter().map(|(_, d)| d).sum();
    let per_sample: Vec<SampleMetrics> = rows.into_iter().map(|(s, _)| s).collect();

    let pull = |f: fn(&SampleMetrics) -> f64| -> Vec<f64> { per_sample.iter().map(f).collect() };
    let aggregates = TestMetrics {
        approx_disparity: MetricSummary::of(&pull(|s| s.approx_disparity)),
        cos_similarity: MetricSummary::of(&pull(|s| s.cos_similarity)),
        continuity: MetricSummary::of(&pull(|s| s.continuity)),
        momentum: MetricSummary::of(&pull(|s| s.momentum)),
        degenerate_fits: degenerate,
    };
    Ok((per_sample, aggregates))
}

/// Spearman rank correlation with average ranks for ties. Errors on
/// constant inputs, where the coefficient is undefined.
pub fn spearman(scores: &[f64], targets: &[f64]) -> Result<f64> {
    if scores.len() != targets.len() || scores.len() < 3 {
        return Err(Error::InvalidParams(
            "spearman needs two equally sized vectors of length >= 3".into(),
        ));
    }
    let ranks = |xs: &[f64]| -> Result<Vec<f64>> {
        let n = xs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        if xs[order[0]] == xs[order[n - 1]] {
            return Err(Error::ConstantInput);
        }
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
                j += 1;
            }
            // Average rank of the tied run [i, j], 1-based.
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                out[idx] = avg;
            }
            i = j + 1;
        }
        Ok(out)
    };
    let ra = ranks(scores)?;
    let rb = ranks(targets)?;
    let ma = math::mean(&ra);
    let mb = math::mean(&rb);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (a, b) in ra.iter().zip(&rb) {
        cov += (a - ma) * (b - mb);
        va += (a - ma) * (a - ma);
        vb += (b - mb) * (b - mb);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Shared inputs precomputed once per experiment: the GV distance matrix
/// (label independent, so computed a single time over the initial
/// unlabeled pool) and the neighbor-graph cache for every shape.
pub struct ExperimentContext {
    pub distance_matrix: Option<DistanceMatrix>,
    pub graphs: GraphCache,
}

impl ExperimentContext {
    pub fn prepare(
        config: &ExperimentConfig,
        dataset: &Dataset,
        unlabeled: &[String],
        test: &[String],
    ) -> Result<Self> {
        let mut shapes: Vec<&Shape> = Vec::with_capacity(unlabeled.len() + test.len());
        for id in unlabeled.iter().chain(test) {
            shapes.push(&dataset.get(id)?.shape);
        }
        let graphs = GraphCache::build(&shapes, config.query.knn_k)?;
        let distance_matrix = if config.strategy == StrategyTag::Gv {
            let pool_shapes: Vec<&Shape> = unlabeled
                .iter()
                .map(|id| dataset.get(id).map(|s| s.shape.as_ref()))
                .collect::<Result<_>>()?;
            Some(queries::distance_matrix(
                &pool_shapes,
                config.query.chamfer_subsample,
            )?)
        } else {
            None
        };
        Ok(Self {
            distance_matrix,
            graphs,
        })
    }
}

/// Runs the configured experiment: one list of round records (round 0 is
/// the initial model) per repetition seed.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &Dataset,
    unlabeled: &[String],
    test: &[String],
) -> Result<Vec<Vec<RoundRecord>>> {
    config.validate(unlabeled.len())?;
    let context = ExperimentContext::prepare(config, dataset, unlabeled, test)?;
    config
        .seeds
        .iter()
        .enumerate()
        .map(|(rep, &seed)| run_repetition(config, dataset, unlabeled, test, &context, rep, seed))
        .collect()
}

fn run_repetition(
    config: &ExperimentConfig,
    dataset: &Dataset,
    unlabeled: &[String],
    test: &[String],
    context: &ExperimentContext,
    repetition: usize,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let mut pool = PoolState::new(dataset, unlabeled, test)?;
    let test_samples: Vec<&LabeledSample> = pool
        .test_ids()
        .iter()
        .map(|id| dataset.get(id))
        .collect::<Result<_>>()?;

    // Initial draw: uniform over the sorted unlabeled ids, a function of
    // the repetition seed only (never of the strategy).
    let mut draw_rng = ChaCha8Rng::seed_from_u64(math::mix_seed(seed, TAG_INITIAL_DRAW));
    let mut candidates = pool.unlabeled_ids();
    let mut initial = Vec::with_capacity(config.initial_labeled);
    for _ in 0..config.initial_labeled {
        let pick = draw_rng.gen_range(0..candidates.len());
        initial.push(candidates.swap_remove(pick));
    }
    initial.sort();
    for id in &initial {
        let truth = dataset.get(id)?.truth.clone();
        pool.reveal(id, truth)?;
    }

    let mut records = Vec::with_capacity(config.schedule.len() + 1);
    let mut model = train_round(config, dataset, &pool, seed, 0, None)?;
    records.push(make_record(
        config,
        &pool,
        &model,
        &test_samples,
        context,
        repetition,
        seed,
        0,
        initial,
        None,
    )?);

    for (round_idx, &k) in config.schedule.iter().enumerate() {
        let round = round_idx + 1;
        let start = Instant::now();
        let candidates = pool.unlabeled_ids();
        let query = run_query(config, dataset, context, &model, &pool, &candidates, seed, round)?;

        // Diagnostic: the current model's true error on every candidate.
        let true_disparity: Vec<f64> = candidates
            .par_iter()
            .map(|id| {
                let sample = dataset.get(id)?;
                let pred = forward(&model, &sample.shape, None)?;
                approx_disparity(&pred, &sample.truth)
            })
            .collect::<Result<_>>()?;
        let diagnostics = QueryDiagnostics {
            candidate_ids: query.candidate_ids.clone(),
            scores: query.scores.clone(),
            true_disparity,
        };

        debug_assert_eq!(query.selected_ids.len(), k);
        for id in &query.selected_ids {
            let truth = dataset.get(id)?.truth.clone();
            pool.reveal(id, truth)?;
        }
        pool.check_disjoint()?;

        let warm = config.warm_start.then_some(&model);
        model = train_round(config, dataset, &pool, seed, round, warm)?;
        let mut record = make_record(
            config,
            &pool,
            &model,
            &test_samples,
            context,
            repetition,
            seed,
            round,
            query.selected_ids.clone(),
            Some(diagnostics),
        )?;
        record.wall_clock_s = start.elapsed().as_secs_f64();
        records.push(record);
    }
    Ok(records)
}

fn run_query(
    config: &ExperimentConfig,
    dataset: &Dataset,
    context: &ExperimentContext,
    model: &SurrogateModel,
    pool: &PoolState,
    candidates: &[String],
    seed: u64,
    round: usize,
) -> Result<QueryResult> {
    let k = config.schedule[round - 1];
    let query_seed = math::mix_seed(math::mix_seed(seed, TAG_QUERY), round as u64);
    match config.strategy {
        StrategyTag::Random => queries::query_random(candidates, k, query_seed),
        StrategyTag::Gv => {
            let matrix = context
                .distance_matrix
                .as_ref()
                .expect("distance matrix prepared for GV");
            queries::query_gv(matrix, &pool.labeled_ids(), candidates, k)
        }
        StrategyTag::Qbc => {
            let shapes: Vec<&Shape> = candidates
                .iter()
                .map(|id| dataset.get(id).map(|s| s.shape.as_ref()))
                .collect::<Result<_>>()?;
            queries::query_qbc(model, &shapes, config.query.committee_members, k, query_seed)
        }
        StrategyTag::Pa => {
            let shapes: Vec<&Shape> = candidates
                .iter()
                .map(|id| dataset.get(id).map(|s| s.shape.as_ref()))
                .collect::<Result<_>>()?;
            queries::query_pa_cached(
                model,
                &shapes,
                &config.fluid,
                config.query.lambda,
                k,
                &context.graphs,
            )
        }
    }
}

fn train_round(
    config: &ExperimentConfig,
    dataset: &Dataset,
    pool: &PoolState,
    seed: u64,
    round: usize,
    warm_from: Option<&SurrogateModel>,
) -> Result<SurrogateModel> {
    let labeled = pool.labeled_ids();
    let mut samples = Vec::with_capacity(labeled.len());
    for id in &labeled {
        let shape = &dataset.get(id)?.shape;
        let field = pool.revealed_field(id)?;
        samples.push((shape.as_ref(), field));
    }
    let base = match warm_from {
        Some(prev) => prev.clone(),
        None => {
            let mut model_cfg = config.model.clone();
            model_cfg.seed =
                math::mix_seed(math::mix_seed(seed, TAG_MODEL_INIT), round as u64);
            init_model(&model_cfg)?
        }
    };
    let mut tcfg = config.train.clone();
    tcfg.seed = math::mix_seed(math::mix_seed(seed, TAG_TRAIN), round as u64);
    train(&base, &samples, &tcfg)
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    config: &ExperimentConfig,
    pool: &PoolState,
    model: &SurrogateModel,
    test_samples: &[&LabeledSample],
    context: &ExperimentContext,
    repetition: usize,
    seed: u64,
    round: usize,
    selected_ids: Vec<String>,
    query: Option<QueryDiagnostics>,
) -> Result<RoundRecord> {
    let (per_sample, test_metrics) =
        evaluate(model, test_samples, &config.fluid, &context.graphs)?;
    Ok(RoundRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        strategy: config.strategy,
        repetition,
        seed,
        round,
        selected_ids,
        labeled_count: pool.labeled_ids().len(),
        oracle_calls: pool.oracle_calls(),
        test_metrics,
        per_sample,
        query,
        wall_clock_s: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_bifurcation, BifurcationParams, GeometryConfig};
    use crate::oracle::Oracle;

    fn tiny_dataset(n: usize) -> Dataset {
        let oracle = Oracle::new(FluidConstants::default(), 0.1);
        let samples = (0..n)
            .map(|i| {
                let params = BifurcationParams::murray(
                    1e-3 + 1e-4 * (i % 5) as f64,
                    5e-3,
                    (3e-3, 3e-3),
                    (0.5, 0.6),
                    0.7 + 0.05 * (i % 4) as f64,
                    i as u64,
                )
                .unwrap();
                let mut shape = generate_bifurcation(
                    &params,
                    &GeometryConfig::with_counts(48, 32, 8),
                )
                .unwrap();
                shape.id = format!("shape_{i:03}");
                let truth = oracle.label(&shape).unwrap().quantized();
                LabeledSample {
                    shape: Arc::new(shape),
                    truth,
                }
            })
            .collect();
        Dataset::new(samples).unwrap()
    }

    fn tiny_config(strategy: StrategyTag) -> ExperimentConfig {
        ExperimentConfig {
            strategy,
            initial_labeled: 2,
            schedule: vec![2, 3],
            seeds: vec![5],
            model: ModelConfig {
                hidden_widths: vec![8],
                dropout_rate: 0.1,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                steps: 20,
                ..TrainConfig::default()
            },
            query: QueryConfig {
                chamfer_subsample: 24,
                committee_members: 3,
                knn_k: 12,
                ..QueryConfig::default()
            },
            fluid: FluidConstants::default(),
            warm_start: false,
        }
    }

    #[test]
    fn approx_disparity_contracts() {
        let gt = VelocityField::new(vec![[1.0, 2.0, 2.0], [0.0, 3.0, 4.0]]);
        assert_eq!(approx_disparity(&gt, &gt).unwrap(), 0.0);
        let zero = VelocityField::zeros(2);
        assert_eq!(approx_disparity(&zero, &gt).unwrap(), 1.0);
        let double = VelocityField::new(vec![[2.0, 4.0, 4.0], [0.0, 6.0, 8.0]]);
        assert!((approx_disparity(&double, &gt).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            approx_disparity(&zero, &VelocityField::zeros(2)),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn cos_similarity_contracts() {
        let gt = VelocityField::new(vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        assert!((cos_similarity(&gt, &gt).unwrap() - 1.0).abs() < 1e-15);
        let neg = VelocityField::new(vec![[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0]]);
        assert!((cos_similarity(&neg, &gt).unwrap() + 1.0).abs() < 1e-15);
        let ortho = VelocityField::new(vec![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(cos_similarity(&ortho, &gt).unwrap(), 0.0);
    }

    #[test]
    fn spearman_contracts() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = a.iter().rev().cloned().collect();
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-15);
        // Hand-ranked: {1,2,3} vs {3,1,2} has rho = -0.5.
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![3.0, 1.0, 2.0];
        assert!((spearman(&x, &y).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &x),
            Err(Error::ConstantInput)
        ));
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        // Ties in x: ranks (1.5, 1.5, 3); y strictly increasing.
        let x = vec![1.0, 1.0, 2.0];
        let y = vec![1.0, 2.0, 3.0];
        let rho = spearman(&x, &y).unwrap();
        // Pearson of (1.5,1.5,3) vs (1,2,3) = (3-2)*(3-2)... compute:
        // cov = 1.5, va = 1.5, vb = 2 -> rho = 1.5/sqrt(3) ~ 0.866.
        assert!((rho - 1.5 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn oracle_replay_is_perfect_on_both_metrics() {
        let dataset = tiny_dataset(4);
        for sample in dataset.iter() {
            assert_eq!(
                approx_disparity(&sample.truth, &sample.truth).unwrap(),
                0.0
            );
            // Wall points carry exact zero vectors, which contribute 0 to
            // the cosine mean by convention; replaying the truth therefore
            // scores exactly the nonzero fraction.
            let nonzero = sample
                .truth
                .values
                .iter()
                .filter(|v| **v != [0.0; 3])
                .count() as f64;
            let expect = nonzero / sample.truth.len() as f64;
            let got = cos_similarity(&sample.truth, &sample.truth).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
        // On a zero-free field the replayed cosine similarity is exactly 1.
        let field = VelocityField::new(vec![[0.1, 0.2, 0.3], [1.0, -2.0, 0.5], [3.0, 0.0, 0.1]]);
        assert!((cos_similarity(&field, &field).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_zero_model_has_unit_disparity() {
        let dataset = tiny_dataset(3);
        let mut model = init_model(&ModelConfig::default()).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let samples: Vec<&LabeledSample> = dataset.iter().collect();
        let graphs = GraphCache::empty(12);
        let (per_sample, metrics) =
            evaluate(&model, &samples, &FluidConstants::default(), &graphs).unwrap();
        for s in &per_sample {
            assert!((s.approx_disparity - 1.0).abs() < 1e-12);
        }
        // Aggregates equal independent recomputation.
        let vals: Vec<f64> = per_sample.iter().map(|s| s.approx_disparity).collect();
        assert!((metrics.approx_disparity.mean - math::mean(&vals)).abs() < 1e-15);
        assert!((metrics.approx_disparity.std - math::sample_std(&vals)).abs() < 1e-15);
    }

    #[test]
    fn schedule_accounting_and_disjointness() {
        let dataset = tiny_dataset(16);
        let ids = dataset.ids();
        let (test, unlabeled) = ids.split_at(4);
        let mut config = tiny_config(StrategyTag::Random);
        config.schedule = vec![4, 3];
        let runs = run_experiment(&config, &dataset, unlabeled, test).unwrap();
        assert_eq!(runs.len(), 1);
        let records = &runs[0];
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].labeled_count, 2);
        assert_eq!(records[1].labeled_count, 6);
        assert_eq!(records[2].labeled_count, 9);
        assert_eq!(records[2].oracle_calls, 9);
        assert_eq!(records[1].selected_ids.len(), 4);
        assert_eq!(records[2].selected_ids.len(), 3);
    }

    #[test]
    fn initial_pools_match_across_strategies() {
        let dataset = tiny_dataset(14);
        let ids = dataset.ids();
        let (test, unlabeled) = ids.split_at(4);
        let random =
            run_experiment(&tiny_config(StrategyTag::Random), &dataset, unlabeled, test).unwrap();
        let pa = run_experiment(&tiny_config(StrategyTag::Pa), &dataset, unlabeled, test).unwrap();
        assert_eq!(random[0][0].selected_ids, pa[0][0].selected_ids);
    }

    #[test]
    fn reruns_are_identical_except_wall_clock() {
        let dataset = tiny_dataset(14);
        let ids = dataset.ids();
        let (test, unlabeled) = ids.split_at(4);
        let config = tiny_config(StrategyTag::Qbc);
        let a = run_experiment(&config, &dataset, unlabeled, test).unwrap();
        let b = run_experiment(&config, &dataset, unlabeled, test).unwrap();
        let strip = |runs: &Vec<Vec<RoundRecord>>| -> Vec<serde_json::Value> {
            runs.iter()
                .flatten()
                .map(|r| {
                    let mut v = serde_json::to_value(r).unwrap();
                    v.as_object_mut().unwrap().remove("wall_clock_s");
                    v
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn validation_rejects_oversized_schedule() {
        let dataset = tiny_dataset(8);
        let ids = dataset.ids();
        let (test, unlabeled) = ids.split_at(4);
        let mut config = tiny_config(StrategyTag::Random);
        config.schedule = vec![4, 4, 4];
        assert!(run_experiment(&config, &dataset, unlabeled, test).is_err());
    }

    #[test]
    fn gv_strategy_runs_end_to_end() {
        let dataset = tiny_dataset(14);
        let ids = dataset.ids();
        let (test, unlabeled) = ids.split_at(4);
        let runs =
            run_experiment(&tiny_config(StrategyTag::Gv), &dataset, unlabeled, test).unwrap();
        let final_record = runs[0].last().unwrap();
        assert_eq!(final_record.labeled_count, 2 + 2 + 3);
        assert!(final_record.query.is_some());
        let diag = final_record.query.as_ref().unwrap();
        assert_eq!(diag.candidate_ids.len(), diag.scores.len());
        assert_eq!(diag.candidate_ids.len(), diag.true_disparity.len());
    }
}
