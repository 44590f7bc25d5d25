//! Paired statistics for strategy comparisons.
//!
//! The Wilcoxon signed-rank test is exact for small samples: after
//! excluding zero differences and ranking the absolute differences with
//! average ranks for ties, all 2^n sign assignments are enumerated and
//! the two-sided p-value is the null probability of a rank sum at least
//! as extreme as the observed one. Larger samples use the normal
//! approximation with tie correction and a continuity correction.

use anyhow::bail;
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest n enumerated exactly (2^12 = 4096 sign patterns).
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Clone, Copy, Debug)]
pub struct WilcoxonResult {
    /// min(W+, W-) over the non-zero differences.
    pub statistic: f64,
    pub p_two_sided: f64,
    /// Differences remaining after zero exclusion.
    pub n_used: usize,
    pub method: WilcoxonMethod,
}

/// Ranks of |d| with average ranks for ties; input order preserved.
fn average_ranks(magnitudes: &[f64]) -> Vec<f64> {
    let n = magnitudes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| magnitudes[a].total_cmp(&magnitudes[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test of paired samples `a` vs `b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> anyhow::Result<WilcoxonResult> {
    if a.len() != b.len() {
        bail!("paired samples differ in length: {} vs {}", a.len(), b.len());
    }
    if a.len() < 5 {
        bail!("wilcoxon needs at least 5 pairs, got {}", a.len());
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        bail!("all paired differences are zero; the test is undefined");
    }
    let n = diffs.len();
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);

    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    if n <= EXACT_LIMIT {
        let p = exact_two_sided(&ranks, w_plus.min(w_minus), total);
        Ok(WilcoxonResult {
            statistic,
            p_two_sided: p,
            n_used: n,
            method: WilcoxonMethod::Exact,
        })
    } else {
        let p = normal_two_sided(&magnitudes, statistic, n);
        Ok(WilcoxonResult {
            statistic,
            p_two_sided: p,
            n_used: n,
            method: WilcoxonMethod::NormalApproximation,
        })
    }
}

/// Exact two-sided p: P(W+ <= w) + P(W+ >= total - w) over all sign
/// assignments of the ranked magnitudes.
fn exact_two_sided(ranks: &[f64], w_small: f64, total: f64) -> f64 {
    let n = ranks.len();
    let patterns = 1u64 << n;
    let tol = 1e-9;
    let mut low = 0u64;
    let mut high = 0u64;
    for bits in 0..patterns {
        let mut w_plus = 0.0;
        for (i, r) in ranks.iter().enumerate() {
            if bits >> i & 1 == 1 {
                w_plus += r;
            }
        }
        if w_plus <= w_small + tol {
            low += 1;
        }
        if w_plus >= total - w_small - tol {
            high += 1;
        }
    }
    ((low + high) as f64 / patterns as f64).min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn normal_two_sided(magnitudes: &[f64], statistic: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
    // Tie correction: subtract sum(t^3 - t)/48 over tie groups.
    let mut sorted = magnitudes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        variance -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    let sigma = variance.sqrt();
    if sigma == 0.0 {
        return 1.0;
    }
    let z = (statistic - mean + 0.5) / sigma;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_differences_n5() {
        let a = [2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.5, 2.0, 2.5, 3.0];
        let result = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(result.method, WilcoxonMethod::Exact);
        assert_eq!(result.statistic, 0.0);
        // One-sided exact p = 1/32, two-sided 1/16.
        assert!((result.p_two_sided - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn constant_negative_shift_is_symmetric() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let pos: Vec<f64> = a.iter().map(|x| x - 0.5).collect();
        let down = wilcoxon_signed_rank(&a, &b).unwrap();
        let up = wilcoxon_signed_rank(&a, &pos).unwrap();
        assert_eq!(down.statistic, up.statistic);
        assert!((down.p_two_sided - up.p_two_sided).abs() < 1e-12);
    }

    #[test]
    fn zero_differences_are_excluded() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 2.0, 1.0, 2.0, 3.0, 4.0];
        let result = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(result.n_used, 4);
    }

    #[test]
    fn all_zero_differences_error() {
        let a = [1.0; 5];
        assert!(wilcoxon_signed_rank(&a, &a).is_err());
    }

    #[test]
    fn exact_and_normal_agree_at_n12() {
        // Mixed-sign differences; agreement within 0.02 at the crossover.
        let a = [
            1.2, 0.8, 1.5, 2.0, 0.4, 1.1, 0.9, 1.7, 1.3, 0.6, 1.8, 0.3,
        ];
        let b = [
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
        ];
        let exact = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(exact.method, WilcoxonMethod::Exact);
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let approx = normal_two_sided(&magnitudes, exact.statistic, 12);
        assert!(
            (exact.p_two_sided - approx).abs() < 0.02,
            "exact {} vs normal {approx}",
            exact.p_two_sided
        );
    }
}
