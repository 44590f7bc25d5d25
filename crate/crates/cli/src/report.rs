//! Report generation from ND-JSON run logs: the summary table, CDF data
//! for per-sample error distributions, and score-vs-error correlation
//! data per strategy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use alflow::engine::{spearman, RoundRecord, RECORD_SCHEMA_VERSION};
use alflow::queries::StrategyTag;
use anyhow::{anyhow, Context};

use crate::stats::wilcoxon_signed_rank;
use crate::{CliError, CliResult};

/// Round records of one log file.
pub fn read_log(path: &Path) -> CliResult<Vec<RoundRecord>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Runtime)?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RoundRecord = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))
            .map_err(CliError::Runtime)?;
        records.push(record);
    }
    Ok(records)
}

/// Reads several logs, enforcing a single schema version across files.
pub fn read_logs(paths: &[PathBuf]) -> CliResult<Vec<RoundRecord>> {
    if paths.is_empty() {
        return Err(CliError::validation("no log files given"));
    }
    let mut all = Vec::new();
    let mut versions: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for path in paths {
        let records = read_log(path)?;
        for r in &records {
            versions
                .entry(r.schema_version)
                .or_default()
                .push(path.display().to_string());
        }
        all.extend(records);
    }
    if versions.len() > 1 {
        let detail: Vec<String> = versions
            .iter()
            .map(|(v, files)| {
                let mut uniq = files.clone();
                uniq.sort();
                uniq.dedup();
                format!("schema {v}: {}", uniq.join(", "))
            })
            .collect();
        return Err(CliError::Runtime(anyhow!(
            "inconsistent log schemas across files ({})",
            detail.join("; ")
        )));
    }
    if let Some((&v, _)) = versions.iter().next() {
        if v != RECORD_SCHEMA_VERSION {
            return Err(CliError::Runtime(anyhow!(
                "unsupported log schema version {v} (expected {RECORD_SCHEMA_VERSION})"
            )));
        }
    }
    Ok(all)
}

/// Fixed metric column set of the summary table.
pub const METRICS: [&str; 4] = ["approx_disp", "cos_sim", "continuity", "momentum"];

fn metric_value(record_sample: &alflow::engine::SampleMetrics, metric: &str) -> f64 {
    match metric {
        "approx_disp" => record_sample.approx_disparity,
        "cos_sim" => record_sample.cos_similarity,
        "continuity" => record_sample.continuity,
        "momentum" => record_sample.momentum,
        other => unreachable!("unknown metric {other}"),
    }
}

/// Lower is better for everything except cosine similarity.
fn lower_is_better(metric: &str) -> bool {
    metric != "cos_sim"
}

#[derive(Clone, Debug)]
pub struct TableRow {
    pub strategy: StrategyTag,
    pub labeled: usize,
    /// Per metric: (mean, std) over pooled per-sample values.
    pub summary: BTreeMap<&'static str, (f64, f64)>,
    /// Metrics on which this strategy is best with p < 0.05 against the
    /// runner-up (per-sample Wilcoxon pairing).
    pub significant: Vec<&'static str>,
    pub n_samples: usize,
}

/// Pooled per-sample metric values keyed by (strategy, labeled count),
/// with (repetition, sample id) kept for pairing.
type Pooled = BTreeMap<(String, usize), Vec<(usize, String, f64)>>;

fn pool_metric(records: &[RoundRecord], metric: &'static str) -> Pooled {
    let mut pooled: Pooled = BTreeMap::new();
    for r in records {
        let key = (r.strategy.to_string(), r.labeled_count);
        let entry = pooled.entry(key).or_default();
        for s in &r.per_sample {
            entry.push((r.repetition, s.id.clone(), metric_value(s, metric)));
        }
    }
    pooled
}

/// Builds the summary table: one row per (strategy, labeled count), mean
/// and std over pooled per-sample values, with significance markers from
/// paired Wilcoxon tests between the best and second-best strategies.
pub fn build_table(records: &[RoundRecord]) -> Vec<TableRow> {
    let mut keys: Vec<(StrategyTag, usize)> = records
        .iter()
        .map(|r| (r.strategy, r.labeled_count))
        .collect();
    keys.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.to_string().cmp(&b.0.to_string())));
    keys.dedup();

    let mut rows: Vec<TableRow> = keys
        .iter()
        .map(|&(strategy, labeled)| TableRow {
            strategy,
            labeled,
            summary: BTreeMap::new(),
            significant: Vec::new(),
            n_samples: 0,
        })
        .collect();

    for metric in METRICS {
        let pooled = pool_metric(records, metric);
        for row in rows.iter_mut() {
            if let Some(values) = pooled.get(&(row.strategy.to_string(), row.labeled)) {
                let xs: Vec<f64> = values.iter().map(|(_, _, v)| *v).collect();
                row.summary
                    .insert(metric, (alflow::math::mean(&xs), alflow::math::sample_std(&xs)));
                row.n_samples = xs.len();
            }
        }

        // Significance per labeled count: best vs second best.
        let labeled_counts: Vec<usize> = {
            let mut l: Vec<usize> = rows.iter().map(|r| r.labeled).collect();
            l.sort();
            l.dedup();
            l
        };
        for labeled in labeled_counts {
            let mut ranked: Vec<(StrategyTag, f64)> = rows
                .iter()
                .filter(|r| r.labeled == labeled)
                .filter_map(|r| r.summary.get(metric).map(|(m, _)| (r.strategy, *m)))
                .collect();
            if ranked.len() < 2 {
                continue;
            }
            ranked.sort_by(|a, b| {
                if lower_is_better(metric) {
                    a.1.total_cmp(&b.1)
                } else {
                    b.1.total_cmp(&a.1)
                }
            });
            let (best, second) = (ranked[0].0, ranked[1].0);
            let a = pooled.get(&(best.to_string(), labeled));
            let b = pooled.get(&(second.to_string(), labeled));
            if let (Some(a), Some(b)) = (a, b) {
                if let Some((xs, ys)) = pair_by_sample(a, b) {
                    if let Ok(result) = wilcoxon_signed_rank(&xs, &ys) {
                        if result.p_two_sided < 0.05 {
                            if let Some(row) = rows
                                .iter_mut()
                                .find(|r| r.labeled == labeled && r.strategy == best)
                            {
                                row.significant.push(metric);
                            }
                        }
                    }
                }
            }
        }
    }
    rows
}

/// Aligns two pooled value lists on (repetition, sample id) pairs.
fn pair_by_sample(
    a: &[(usize, String, f64)],
    b: &[(usize, String, f64)],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let index: BTreeMap<(usize, &str), f64> = b
        .iter()
        .map(|(rep, id, v)| ((*rep, id.as_str()), *v))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (rep, id, v) in a {
        if let Some(w) = index.get(&(*rep, id.as_str())) {
            xs.push(*v);
            ys.push(*w);
        }
    }
    if xs.len() >= 5 {
        Some((xs, ys))
    } else {
        None
    }
}

fn fmt(v: f64) -> String {
    // Shortest round-trip representation; report values must survive a
    // parse back to f64 exactly.
    format!("{v}")
}

/// `table.csv`: mean and std per metric per (strategy, labeled count).
pub fn write_table_csv(rows: &[TableRow], path: &Path) -> CliResult<()> {
    let mut out = String::from(
        "strategy,labeled,approx_disp_mean,approx_disp_std,cos_sim_mean,cos_sim_std,\
         continuity_mean,continuity_std,momentum_mean,momentum_std,n_samples,significant\n",
    );
    for row in rows {
        let mut cols = vec![row.strategy.to_string(), row.labeled.to_string()];
        for metric in METRICS {
            let (mean, std) = row.summary.get(metric).copied().unwrap_or((f64::NAN, f64::NAN));
            cols.push(fmt(mean));
            cols.push(fmt(std));
        }
        cols.push(row.n_samples.to_string());
        cols.push(row.significant.join("+"));
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `cdf.csv`: sorted per-sample approximation disparities per
/// (strategy, labeled count), plot-ready for empirical CDFs.
pub fn write_cdf_csv(records: &[RoundRecord], path: &Path) -> CliResult<()> {
    let pooled = pool_metric(records, "approx_disp");
    let mut out = String::from("strategy,labeled,rank,approx_disp\n");
    for ((strategy, labeled), values) in pooled {
        let mut xs: Vec<f64> = values.iter().map(|(_, _, v)| *v).collect();
        xs.sort_by(f64::total_cmp);
        for (rank, v) in xs.iter().enumerate() {
            out.push_str(&format!("{strategy},{labeled},{rank},{}\n", fmt(*v)));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-round Spearman correlation between query scores and the model's
/// true error on the unlabeled pool.
#[derive(Clone, Debug)]
pub struct CorrelationRow {
    pub strategy: StrategyTag,
    pub repetition: usize,
    pub round: usize,
    pub labeled: usize,
    pub rho: Option<f64>,
    pub n: usize,
}

pub fn correlations(records: &[RoundRecord]) -> Vec<CorrelationRow> {
    let mut rows = Vec::new();
    for r in records {
        if let Some(q) = &r.query {
            let rho = spearman(&q.scores, &q.true_disparity).ok();
            rows.push(CorrelationRow {
                strategy: r.strategy,
                repetition: r.repetition,
                round: r.round,
                labeled: r.labeled_count,
                rho,
                n: q.scores.len(),
            });
        }
    }
    rows
}

/// `correlations.csv` plus `correlation_pairs.csv` with the raw
/// (score, true disparity) pairs.
pub fn write_correlation_csv(records: &[RoundRecord], dir: &Path) -> CliResult<()> {
    let mut summary = String::from("strategy,repetition,round,labeled,spearman_rho,n\n");
    for row in correlations(records) {
        let rho = row.rho.map_or(String::from("nan"), fmt);
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.strategy, row.repetition, row.round, row.labeled, rho, row.n
        ));
    }
    std::fs::write(dir.join("correlations.csv"), summary)?;

    let mut pairs = String::from("strategy,repetition,round,candidate_id,score,true_disparity\n");
    for r in records {
        if let Some(q) = &r.query {
            for ((id, score), disp) in q
                .candidate_ids
                .iter()
                .zip(&q.scores)
                .zip(&q.true_disparity)
            {
                pairs.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.strategy,
                    r.repetition,
                    r.round,
                    id,
                    fmt(*score),
                    fmt(*disp)
                ));
            }
        }
    }
    std::fs::write(dir.join("correlation_pairs.csv"), pairs)?;
    Ok(())
}
