//! Query strategies: rank the unlabeled pool and pick the next batch.
//!
//! Four strategies are implemented. Geometry variance (GV) runs
//! farthest-point sampling on transductive descriptors, the rows of the
//! pairwise Chamfer distance matrix. Query-by-committee (QBC) ranks by
//! the mean per-point prediction variance of a Monte Carlo dropout
//! committee. Physics adherence (PA) ranks by the joint Navier-Stokes
//! residual of the deterministic prediction. Random is the seeded
//! baseline.
//!
//! Candidates are passed in a caller-fixed order (the engine uses ids
//! sorted ascending); all top-k ties break to the lower candidate index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffops::{ns_residuals_cached, SubcloudGraph, DEFAULT_KNN};
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sampling, Shape};
use crate::math::{self, Vec3};
use crate::oracle::FluidConstants;
use crate::surrogate::{committee_predict, forward, SurrogateModel};

/// Momentum weight in the joint Navier-Stokes ranking score.
pub const DEFAULT_NS_LAMBDA: f64 = 1e-4;

/// Default per-shape subsample size for pairwise Chamfer distances.
pub const DEFAULT_CHAMFER_SUBSAMPLE: usize = 256;

/// Default committee size for QBC.
pub const DEFAULT_COMMITTEE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Random,
    Gv,
    Qbc,
    Pa,
}

impl std::fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StrategyTag::Random => "random",
            StrategyTag::Gv => "gv",
            StrategyTag::Qbc => "qbc",
            StrategyTag::Pa => "pa",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for StrategyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyTag::Random),
            "gv" => Ok(StrategyTag::Gv),
            "qbc" => Ok(StrategyTag::Qbc),
            "pa" => Ok(StrategyTag::Pa),
            other => Err(Error::InvalidParams(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Outcome of one query round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryResult {
    pub strategy: StrategyTag,
    /// Chosen ids in selection order; length equals the requested k.
    pub selected_ids: Vec<String>,
    /// All candidate ids, in the order they were presented.
    pub candidate_ids: Vec<String>,
    /// Ranking value per candidate, aligned with `candidate_ids`.
    pub scores: Vec<f64>,
    pub metadata: serde_json::Value,
}

/// Symmetric pairwise Chamfer distances between shapes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    /// Row-major |ids| x |ids| entries, meters.
    pub entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }
}

/// Chamfer distance: mean nearest-neighbor distance from each set to the
/// other, summed over both directions.
pub fn chamfer(p1: &[Vec3], p2: &[Vec3]) -> Result<f64> {
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let one_way = |from: &[Vec3], to: &[Vec3]| -> f64 {
        let total: f64 = from
            .iter()
            .map(|&a| {
                to.iter()
                    .map(|&b| math::dist2(a, b))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum();
        total / from.len() as f64
    };
    Ok(one_way(p1, p2) + one_way(p2, p1))
}

/// Deterministic FPS subsample of a shape's points used by
/// [`distance_matrix`]; exposed so diagnostics can recompute entries.
pub fn chamfer_subsample(shape: &Shape, subsample: usize) -> Result<Vec<Vec3>> {
    let k = subsample.min(shape.len());
    let picks = farthest_point_sampling(&shape.points, &[], k)?;
    Ok(picks.into_iter().map(|i| shape.points[i]).collect())
}

/// All pairwise Chamfer distances between shapes, each shape first
/// reduced to `subsample` points by farthest-point sampling. The upper
/// triangle is computed and mirrored, so the result is symmetric with a
/// zero diagonal by construction.
pub fn distance_matrix(shapes: &[&Shape], subsample: usize) -> Result<DistanceMatrix> {
    if shapes.len() < 2 {
        return Err(Error::InvalidParams(
            "distance matrix needs at least two shapes".into(),
        ));
    }
    let subsamples: Vec<Vec<Vec3>> = shapes
        .par_iter()
        .map(|s| chamfer_subsample(s, subsample))
        .collect::<Result<_>>()?;

    let n = shapes.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| chamfer(&subsamples[i], &subsamples[j]))
        .collect::<Result<_>>()?;

    let mut entries = vec![0.0; n * n];
    for (&(i, j), &d) in pairs.iter().zip(&values) {
        entries[i * n + j] = d;
        entries[j * n + i] = d;
    }
    Ok(DistanceMatrix {
        ids: shapes.iter().map(|s| s.id.clone()).collect(),
        entries,
    })
}

/// Geometry-variance query: farthest-point sampling over transductive
/// descriptors (matrix rows) with the labeled descriptors preselected.
///
/// Reported scores are each candidate's minimum descriptor distance to
/// the labeled set before any selection; the greedy selection order is
/// kept in the metadata.
pub fn query_gv(
    matrix: &DistanceMatrix,
    labeled_ids: &[String],
    unlabeled_ids: &[String],
    k: usize,
) -> Result<QueryResult> {
    if k > unlabeled_ids.len() {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: unlabeled_ids.len(),
        });
    }
    let labeled_rows: Vec<&[f64]> = labeled_ids
        .iter()
        .map(|id| matrix.index_of(id).map(|i| matrix.row(i)))
        .collect::<Result<_>>()?;
    let unlabeled_rows: Vec<&[f64]> = unlabeled_ids
        .iter()
        .map(|id| matrix.index_of(id).map(|i| matrix.row(i)))
        .collect::<Result<_>>()?;

    // Rows: labeled first (preselected), then candidates in caller order.
    let mut rows: Vec<&[f64]> = Vec::with_capacity(labeled_rows.len() + unlabeled_rows.len());
    rows.extend_from_slice(&labeled_rows);
    rows.extend_from_slice(&unlabeled_rows);
    let preselected: Vec<usize> = (0..labeled_rows.len()).collect();
    let picks = farthest_point_sampling(&rows, &preselected, k)?;
    let selected_ids: Vec<String> = picks
        .iter()
        .map(|&p| unlabeled_ids[p - labeled_rows.len()].clone())
        .collect();

    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let scores: Vec<f64> = if labeled_rows.is_empty() {
        // No labeled descriptors yet: fall back to distance from the
        // candidate centroid.
        let dim = matrix.len();
        let mut centroid = vec![0.0; dim];
        for row in &unlabeled_rows {
            for (c, x) in centroid.iter_mut().zip(*row) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= unlabeled_rows.len().max(1) as f64;
        }
        unlabeled_rows.iter().map(|row| dist(row, &centroid)).collect()
    } else {
        unlabeled_rows
            .iter()
            .map(|row| {
                labeled_rows
                    .iter()
                    .map(|l| dist(row, l))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };

    Ok(QueryResult {
        strategy: StrategyTag::Gv,
        selected_ids,
        candidate_ids: unlabeled_ids.to_vec(),
        scores,
        metadata: serde_json::json!({
            "selection_order": picks.iter().map(|&p| p - labeled_rows.len()).collect::<Vec<_>>(),
        }),
    })
}

fn top_k_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Descending score, ties to the lower candidate index.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Query-by-committee: mean over points of the trace of the sample
/// covariance (divisor M-1) of the member predictions. Member mask seeds
/// derive from the shape id, so duplicated shapes score identically.
pub fn query_qbc(
    model: &SurrogateModel,
    candidates: &[&Shape],
    members: usize,
    k: usize,
    seed: u64,
) -> Result<QueryResult> {
    if k > candidates.len() {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: candidates.len(),
        });
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|shape| {
            let shape_seed = math::mix_seed(seed, math::hash_str(&shape.id));
            let fields = committee_predict(model, shape, members, shape_seed)?;
            Ok(committee_variance(&fields))
        })
        .collect::<Result<_>>()?;

    let picks = top_k_by_score(&scores, k);
    Ok(QueryResult {
        strategy: StrategyTag::Qbc,
        selected_ids: picks.iter().map(|&i| candidates[i].id.clone()).collect(),
        candidate_ids: candidates.iter().map(|s| s.id.clone()).collect(),
        scores,
        metadata: serde_json::json!({ "members": members }),
    })
}

/// Mean over points of tr(cov) across committee members; 0 for fewer
/// than two members.
pub fn committee_variance(fields: &[crate::oracle::VelocityField]) -> f64 {
    let m = fields.len();
    if m < 2 {
        return 0.0;
    }
    let n_points = fields[0].len();
    let mut total = 0.0;
    for p in 0..n_points {
        let mut mean = [0.0; 3];
        for f in fields {
            mean = math::add(mean, f.values[p]);
        }
        mean = math::scale(mean, 1.0 / m as f64);
        let mut tr = 0.0;
        for f in fields {
            tr += math::norm2(math::sub(f.values[p], mean));
        }
        total += tr / (m - 1) as f64;
    }
    total / n_points as f64
}

/// Physics-adherence query: score = L_continuity + lambda * L_momentum of
/// the deterministic prediction; highest residual (worst physics) first.
pub fn query_pa(
    model: &SurrogateModel,
    candidates: &[&Shape],
    constants: &FluidConstants,
    lambda: f64,
    k: usize,
) -> Result<QueryResult> {
    query_pa_cached(model, candidates, constants, lambda, k, &GraphCache::empty(DEFAULT_KNN))
}

/// [`query_pa`] with precomputed sub-cloud graphs.
pub fn query_pa_cached(
    model: &SurrogateModel,
    candidates: &[&Shape],
    constants: &FluidConstants,
    lambda: f64,
    k: usize,
    graphs: &GraphCache,
) -> Result<QueryResult> {
    if k > candidates.len() {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: candidates.len(),
        });
    }
    let detail: Vec<(f64, f64, f64)> = candidates
        .par_iter()
        .map(|shape| {
            let pred = forward(model, shape, None)?;
            let res = match graphs.get(&shape.id) {
                Some(cache) => ns_residuals_cached(shape, &pred, constants, cache)?,
                None => {
                    let cache = SubcloudGraph::build(shape, graphs.k)?;
                    ns_residuals_cached(shape, &pred, constants, &cache)?
                }
            };
            Ok((
                res.continuity + lambda * res.momentum,
                res.continuity,
                res.momentum,
            ))
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = detail.iter().map(|d| d.0).collect();

    let picks = top_k_by_score(&scores, k);
    Ok(QueryResult {
        strategy: StrategyTag::Pa,
        selected_ids: picks.iter().map(|&i| candidates[i].id.clone()).collect(),
        candidate_ids: candidates.iter().map(|s| s.id.clone()).collect(),
        scores,
        metadata: serde_json::json!({
            "lambda": lambda,
            "continuity": detail.iter().map(|d| d.1).collect::<Vec<_>>(),
            "momentum": detail.iter().map(|d| d.2).collect::<Vec<_>>(),
        }),
    })
}

/// Uniform sample without replacement from a seeded generator. Scores
/// are each candidate's position in the seeded shuffle.
pub fn query_random(unlabeled_ids: &[String], k: usize, seed: u64) -> Result<QueryResult> {
    if k > unlabeled_ids.len() {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available: unlabeled_ids.len(),
        });
    }
    let n = unlabeled_ids.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut scores = vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        scores[idx] = rank as f64;
    }
    Ok(QueryResult {
        strategy: StrategyTag::Random,
        selected_ids: order[..k].iter().map(|&i| unlabeled_ids[i].clone()).collect(),
        candidate_ids: unlabeled_ids.to_vec(),
        scores,
        metadata: serde_json::json!({ "seed": seed }),
    })
}

/// Prebuilt interior+wall neighbor graphs keyed by shape id. Shapes
/// missing from the cache get a graph built on the fly with stencil `k`.
#[derive(Debug)]
pub struct GraphCache {
    map: std::collections::HashMap<String, SubcloudGraph>,
    pub k: usize,
}

impl GraphCache {
    pub fn empty(k: usize) -> Self {
        Self {
            map: std::collections::HashMap::new(),
            k,
        }
    }

    pub fn build(shapes: &[&Shape], k: usize) -> Result<Self> {
        let entries: Vec<(String, SubcloudGraph)> = shapes
            .par_iter()
            .map(|s| Ok((s.id.clone(), SubcloudGraph::build(s, k)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            map: entries.into_iter().collect(),
            k,
        })
    }

    pub fn get(&self, id: &str) -> Option<&SubcloudGraph> {
        self.map.get(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_bifurcation, BifurcationParams, GeometryConfig};
    use crate::oracle::VelocityField;
    use crate::surrogate::{init_model, ModelConfig};

    fn shape_with_seed(seed: u64) -> Shape {
        let params = BifurcationParams::straight_tube(1e-3, 5e-3, seed);
        generate_bifurcation(&params, &GeometryConfig::with_counts(48, 24, 6)).unwrap()
    }

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn chamfer_identical_sets() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]];
        assert_eq!(chamfer(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_single_points() {
        let a = vec![[0.0, 0.0, 0.0]];
        let b = vec![[1.0, 0.0, 0.0]];
        assert!((chamfer(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_asymmetric_counts() {
        let a = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let b = vec![[0.0, 0.0, 0.0]];
        // (0 + 1)/2 + 0/1 = 0.5
        assert!((chamfer(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chamfer_rejects_empty() {
        let a: Vec<Vec3> = vec![];
        let b = vec![[0.0, 0.0, 0.0]];
        assert!(chamfer(&a, &b).is_err());
    }

    #[test]
    fn distance_matrix_matches_direct_calls() {
        let shapes: Vec<Shape> = (0..4).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let m = distance_matrix(&refs, 32).unwrap();
        for i in 0..4 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..4 {
                assert!((m.get(i, j) - m.get(j, i)).abs() < 1e-12);
                if i != j {
                    let a = chamfer_subsample(&shapes[i], 32).unwrap();
                    let b = chamfer_subsample(&shapes[j], 32).unwrap();
                    assert_eq!(m.get(i, j), chamfer(&a, &b).unwrap());
                }
            }
        }
    }

    #[test]
    fn distance_matrix_zero_for_identical_shapes() {
        let a = shape_with_seed(1);
        let mut b = a.clone();
        b.id = "copy".into();
        let m = distance_matrix(&[&a, &b], 16).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn translated_shape_has_positive_distance() {
        let a = shape_with_seed(2);
        let mut b = a.clone();
        b.id = "moved".into();
        for p in &mut b.points {
            p[0] += 0.5;
        }
        let m = distance_matrix(&[&a, &b], 16).unwrap();
        assert!(m.get(0, 1) > 0.4);
    }

    #[test]
    fn gv_single_candidate() {
        let m = DistanceMatrix {
            ids: ids(&["a", "b"]),
            entries: vec![0.0, 1.0, 1.0, 0.0],
        };
        let result = query_gv(&m, &ids(&["a"]), &ids(&["b"]), 1).unwrap();
        assert_eq!(result.selected_ids, ids(&["b"]));
    }

    #[test]
    fn gv_prefers_distinct_descriptor() {
        // "twin" duplicates the labeled shape "a"; "far" is distinct.
        // Descriptor rows over {a, twin, far}.
        let entries = vec![
            0.0, 0.0, 5.0, //
            0.0, 0.0, 5.0, //
            5.0, 5.0, 0.0,
        ];
        let m = DistanceMatrix {
            ids: ids(&["a", "twin", "far"]),
            entries,
        };
        let result = query_gv(&m, &ids(&["a"]), &ids(&["twin", "far"]), 1).unwrap();
        assert_eq!(result.selected_ids, ids(&["far"]));
        // Brute-force check: "far" maximizes min distance to labeled rows.
        assert!(result.scores[1] > result.scores[0]);
    }

    #[test]
    fn gv_exhausts_candidates() {
        let shapes: Vec<Shape> = (0..5).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let m = distance_matrix(&refs, 16).unwrap();
        let labeled = vec![shapes[0].id.clone()];
        let unlabeled: Vec<String> = shapes[1..].iter().map(|s| s.id.clone()).collect();
        let result = query_gv(&m, &labeled, &unlabeled, 4).unwrap();
        let mut sorted = result.selected_ids.clone();
        sorted.sort();
        let mut expect = unlabeled.clone();
        expect.sort();
        assert_eq!(sorted, expect);
    }

    #[test]
    fn gv_first_pick_maximizes_min_distance_to_labeled() {
        let shapes: Vec<Shape> = (10..18).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let m = distance_matrix(&refs, 24).unwrap();
        let labeled: Vec<String> = shapes[..2].iter().map(|s| s.id.clone()).collect();
        let unlabeled: Vec<String> = shapes[2..].iter().map(|s| s.id.clone()).collect();
        let result = query_gv(&m, &labeled, &unlabeled, 1).unwrap();
        let best_score = result
            .scores
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let picked_idx = result
            .candidate_ids
            .iter()
            .position(|id| *id == result.selected_ids[0])
            .unwrap();
        assert_eq!(result.scores[picked_idx], best_score);
    }

    #[test]
    fn gv_rejects_unknown_id() {
        let m = DistanceMatrix {
            ids: ids(&["a", "b"]),
            entries: vec![0.0, 1.0, 1.0, 0.0],
        };
        assert!(matches!(
            query_gv(&m, &ids(&["a"]), &ids(&["zzz"]), 1),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn qbc_zero_dropout_degenerates_to_tie_break() {
        let shapes: Vec<Shape> = (0..4).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let config = ModelConfig {
            dropout_rate: 0.0,
            ..ModelConfig::default()
        };
        let model = init_model(&config).unwrap();
        let result = query_qbc(&model, &refs, 4, 2, 7).unwrap();
        assert!(result.scores.iter().all(|&s| s == 0.0));
        // All scores zero: selection falls back to candidate order.
        assert_eq!(result.selected_ids[0], shapes[0].id);
        assert_eq!(result.selected_ids[1], shapes[1].id);
    }

    #[test]
    fn qbc_scores_match_variance_recomputation() {
        let shapes: Vec<Shape> = (0..3).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let model = init_model(&ModelConfig::default()).unwrap(); // dropout 0.1
        let members = 6;
        let seed = 13;
        let result = query_qbc(&model, &refs, members, 1, seed).unwrap();
        for (i, shape) in shapes.iter().enumerate() {
            let shape_seed = math::mix_seed(seed, math::hash_str(&shape.id));
            let fields = committee_predict(&model, shape, members, shape_seed).unwrap();
            // Independent recomputation from the stored member fields.
            let m = fields.len() as f64;
            let n = shape.len();
            let mut total = 0.0;
            for p in 0..n {
                let mut mean = [0.0; 3];
                for f in &fields {
                    mean = math::add(mean, f.values[p]);
                }
                mean = math::scale(mean, 1.0 / m);
                let ss: f64 = fields
                    .iter()
                    .map(|f| math::norm2(math::sub(f.values[p], mean)))
                    .sum();
                total += ss / (m - 1.0);
            }
            let expect = total / n as f64;
            assert!((result.scores[i] - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn qbc_duplicate_shapes_score_equally() {
        let shape = shape_with_seed(3);
        let dup = shape.clone();
        let model = init_model(&ModelConfig::default()).unwrap();
        let result = query_qbc(&model, &[&shape, &dup], 5, 1, 99).unwrap();
        assert_eq!(result.scores[0], result.scores[1]);
    }

    #[test]
    fn qbc_scores_invariant_to_member_order() {
        let shape = shape_with_seed(8);
        let model = init_model(&ModelConfig::default()).unwrap();
        let fields = committee_predict(&model, &shape, 6, 4).unwrap();
        let forward_var = committee_variance(&fields);
        let mut reversed = fields.clone();
        reversed.reverse();
        assert!((committee_variance(&reversed) - forward_var).abs() < 1e-15);
    }

    #[test]
    fn pa_zero_model_scores_zero() {
        let shapes: Vec<Shape> = (0..2).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let config = ModelConfig::default();
        let mut model = init_model(&config).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let result =
            query_pa(&model, &refs, &FluidConstants::default(), DEFAULT_NS_LAMBDA, 1).unwrap();
        assert!(result.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pa_prefers_divergent_prediction() {
        // Score the residuals of two hand-made fields directly: the
        // divergent field (x, y, z) has |div| = 3, the zero field 0.
        let shape_a = shape_with_seed(5);
        let shape_b = shape_with_seed(6);
        let constants = FluidConstants::default();
        let field_a =
            VelocityField::new(shape_a.points.iter().map(|p| [p[0], p[1], p[2]]).collect());
        let field_b = VelocityField::zeros(shape_b.len());
        let res_a = crate::diffops::ns_residuals(&shape_a, &field_a, &constants).unwrap();
        let res_b = crate::diffops::ns_residuals(&shape_b, &field_b, &constants).unwrap();
        let score_a = res_a.continuity + DEFAULT_NS_LAMBDA * res_a.momentum;
        let score_b = res_b.continuity + DEFAULT_NS_LAMBDA * res_b.momentum;
        assert!((res_a.continuity - 3.0).abs() < 1e-6);
        assert!(score_a > score_b);
        assert_eq!(score_b, 0.0);
    }

    #[test]
    fn pa_selection_orders_by_score() {
        let shapes: Vec<Shape> = (0..3).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let model = init_model(&ModelConfig {
            dropout_rate: 0.0,
            ..ModelConfig::default()
        })
        .unwrap();
        let result =
            query_pa(&model, &refs, &FluidConstants::default(), DEFAULT_NS_LAMBDA, 3).unwrap();
        // Selected order must be descending in score.
        let score_of = |id: &String| {
            let i = result.candidate_ids.iter().position(|c| c == id).unwrap();
            result.scores[i]
        };
        let s: Vec<f64> = result.selected_ids.iter().map(score_of).collect();
        assert!(s[0] >= s[1] && s[1] >= s[2]);
    }

    #[test]
    fn random_exhausts_and_repeats_with_seed() {
        let pool = ids(&["a", "b", "c", "d"]);
        let all = query_random(&pool, 4, 5).unwrap();
        let mut sorted = all.selected_ids.clone();
        sorted.sort();
        assert_eq!(sorted, pool);
        let again = query_random(&pool, 4, 5).unwrap();
        assert_eq!(all.selected_ids, again.selected_ids);
        let different = query_random(&pool, 4, 6).unwrap();
        assert_ne!(all.selected_ids, different.selected_ids);
    }

    #[test]
    fn random_is_uniform_over_trials() {
        let pool = ids(&["a", "b", "c", "d"]);
        let trials = 10_000;
        let mut counts = std::collections::HashMap::new();
        for t in 0..trials {
            let r = query_random(&pool, 1, t as u64).unwrap();
            *counts.entry(r.selected_ids[0].clone()).or_insert(0usize) += 1;
        }
        // Binomial(10000, 1/4): sigma = sqrt(n p q) ~ 43.3; allow 3 sigma.
        let sigma = (trials as f64 * 0.25 * 0.75).sqrt();
        for id in &pool {
            let c = counts[id] as f64;
            assert!(
                (c - 2500.0).abs() < 3.0 * sigma,
                "frequency of {id}: {c} outside 3 sigma"
            );
        }
    }

    #[test]
    fn selections_are_disjoint_from_labeled_and_sized() {
        let shapes: Vec<Shape> = (0..6).map(shape_with_seed).collect();
        let refs: Vec<&Shape> = shapes.iter().collect();
        let m = distance_matrix(&refs, 16).unwrap();
        let labeled: Vec<String> = shapes[..2].iter().map(|s| s.id.clone()).collect();
        let unlabeled: Vec<String> = shapes[2..].iter().map(|s| s.id.clone()).collect();
        let candidates: Vec<&Shape> = shapes[2..].iter().collect();
        let model = init_model(&ModelConfig::default()).unwrap();
        let k = 2;

        let results = vec![
            query_random(&unlabeled, k, 3).unwrap(),
            query_gv(&m, &labeled, &unlabeled, k).unwrap(),
            query_qbc(&model, &candidates, 4, k, 3).unwrap(),
            query_pa(
                &model,
                &candidates,
                &FluidConstants::default(),
                DEFAULT_NS_LAMBDA,
                k,
            )
            .unwrap(),
        ];
        for r in results {
            assert_eq!(r.selected_ids.len(), k);
            let unique: std::collections::HashSet<_> = r.selected_ids.iter().collect();
            assert_eq!(unique.len(), k, "{:?} repeated a selection", r.strategy);
            for id in &r.selected_ids {
                assert!(unlabeled.contains(id));
                assert!(!labeled.contains(id));
            }
        }
    }
}
