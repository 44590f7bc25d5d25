//! `stats`: paired Wilcoxon comparison of two strategies from run logs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use alflow::engine::RoundRecord;

use crate::report::read_logs;
use crate::stats::{wilcoxon_signed_rank, WilcoxonMethod};
use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pairing {
    /// Pair on (repetition, test sample id) values.
    PerSample,
    /// Pair per-repetition metric means.
    PerRepetition,
}

impl std::str::FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-sample" => Ok(Pairing::PerSample),
            "per-repetition" => Ok(Pairing::PerRepetition),
            other => Err(format!(
                "unknown pairing '{other}' (expected per-sample or per-repetition)"
            )),
        }
    }
}

fn metric_of(sample: &alflow::engine::SampleMetrics, metric: &str) -> Option<f64> {
    match metric {
        "approx_disp" => Some(sample.approx_disparity),
        "cos_sim" => Some(sample.cos_similarity),
        "continuity" => Some(sample.continuity),
        "momentum" => Some(sample.momentum),
        _ => None,
    }
}

/// Collects paired metric vectors of one strategy at one labeled count.
fn collect(
    records: &[RoundRecord],
    strategy: &str,
    labeled: usize,
    metric: &str,
    pairing: Pairing,
) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut rep_values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.strategy.to_string() != strategy || r.labeled_count != labeled {
            continue;
        }
        for s in &r.per_sample {
            if let Some(v) = metric_of(s, metric) {
                match pairing {
                    Pairing::PerSample => {
                        out.insert(format!("{}:{}", r.repetition, s.id), v);
                    }
                    Pairing::PerRepetition => {
                        rep_values.entry(r.repetition).or_default().push(v);
                    }
                }
            }
        }
    }
    if pairing == Pairing::PerRepetition {
        for (rep, values) in rep_values {
            out.insert(format!("{rep}"), alflow::math::mean(&values));
        }
    }
    out
}

pub struct StatsArgs {
    pub logs: Vec<PathBuf>,
    pub strategy_a: String,
    pub strategy_b: String,
    pub metric: String,
    /// Labeled count to compare at; None means the largest present.
    pub labeled: Option<usize>,
    pub pairing: Pairing,
}

pub fn run(args: &StatsArgs) -> CliResult<()> {
    let records = read_logs(&args.logs)?;
    if !crate::report::METRICS.contains(&args.metric.as_str()) {
        return Err(CliError::validation(format!(
            "unknown metric '{}' (expected one of {:?})",
            args.metric,
            crate::report::METRICS
        )));
    }
    let labeled = match args.labeled {
        Some(l) => l,
        None => records
            .iter()
            .map(|r| r.labeled_count)
            .max()
            .ok_or_else(|| CliError::validation("logs contain no records"))?,
    };
    let a = collect(&records, &args.strategy_a, labeled, &args.metric, args.pairing);
    let b = collect(&records, &args.strategy_b, labeled, &args.metric, args.pairing);

    let keys: Vec<&String> = a.keys().filter(|k| b.contains_key(*k)).collect();
    if keys.len() < 5 {
        return Err(CliError::validation(format!(
            "only {} common pairs between '{}' and '{}' at labeled={labeled}",
            keys.len(),
            args.strategy_a,
            args.strategy_b
        )));
    }
    let xs: Vec<f64> = keys.iter().map(|k| a[*k]).collect();
    let ys: Vec<f64> = keys.iter().map(|k| b[*k]).collect();
    let result = wilcoxon_signed_rank(&xs, &ys).map_err(CliError::Runtime)?;
    let method = match result.method {
        WilcoxonMethod::Exact => "exact",
        WilcoxonMethod::NormalApproximation => "normal-approximation",
    };
    println!(
        "wilcoxon {} vs {} on {} at labeled={labeled} ({} pairs, {method}): \
         statistic={:.3}, two-sided p={:.6}",
        args.strategy_a,
        args.strategy_b,
        args.metric,
        result.n_used,
        result.statistic,
        result.p_two_sided
    );
    Ok(())
}
