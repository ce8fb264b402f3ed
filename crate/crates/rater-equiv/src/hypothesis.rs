//! Nonparametric difference tests and TOST equivalence.
//!
//! The Friedman test asks whether any of k raters differs from the others
//! across items; Wilcoxon signed-rank compares one rater pair; Bonferroni
//! corrects a p-value for its comparison family; TOST declares two raters
//! equivalent when their mean difference is statistically confined within
//! a margin.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::rank::{midranks, tie_correction_sum};
use crate::ratings::PairedRatings;

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("aligned vectors required: {0}")]
    Shape(String),
    #[error("need at least {needed} raters, got {got}")]
    InsufficientRaters { needed: usize, got: usize },
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{0}")]
    Parameter(String),
}

/// Statistic, p-value, and a human-readable description of the method
/// actually used (exact vs approximate, counts dropped, corrections).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
}

/// Outcome of the two one-sided tests at margin `margin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TostResult {
    pub margin: f64,
    pub alpha: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    /// max(p_lower, p_upper); equivalence requires both sides small.
    pub p_value: f64,
    pub equivalent: bool,
}

/// Friedman rank test over k aligned rating columns (one per rater).
/// Mid-ranks within each item, chi-square statistic with tie correction,
/// p from chi-square with k-1 degrees of freedom. When every item ranks
/// all raters identically the statistic is 0 and p is 1 by convention.
pub fn friedman_test(columns: &[Vec<f64>]) -> Result<TestResult, HypothesisError> {
    let k = columns.len();
    if k < 2 {
        return Err(HypothesisError::InsufficientRaters { needed: 2, got: k });
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        let lengths: Vec<usize> = columns.iter().map(Vec::len).collect();
        return Err(HypothesisError::Shape(format!(
            "column lengths differ: {lengths:?}"
        )));
    }
    if n < 2 {
        return Err(HypothesisError::InsufficientData { needed: 2, got: n });
    }

    let kf = k as f64;
    let nf = n as f64;
    let mut rank_sums = vec![0.0; k];
    let mut tie_sum = 0.0;
    let mut row = vec![0.0; k];
    for i in 0..n {
        for (j, column) in columns.iter().enumerate() {
            row[j] = column[i];
        }
        let ranks = midranks(&row);
        for (j, rank) in ranks.iter().enumerate() {
            rank_sums[j] += rank;
        }
        tie_sum += tie_correction_sum(&row);
    }

    let correction = 1.0 - tie_sum / (nf * kf * (kf * kf - 1.0));
    let df = kf - 1.0;
    if correction <= 0.0 {
        // Complete ties in every item: no rank variation at all.
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            method: format!(
                "friedman chi-square, {k} raters, {n} items, all within-item ranks tied"
            ),
        });
    }
    let sum_squares: f64 = rank_sums.iter().map(|r| r * r).sum();
    let uncorrected = 12.0 / (nf * kf * (kf + 1.0)) * sum_squares - 3.0 * nf * (kf + 1.0);
    let statistic = (uncorrected / correction).max(0.0);
    let p_value = ChiSquared::new(df)
        .expect("df >= 1")
        .sf(statistic)
        .clamp(0.0, 1.0);
    Ok(TestResult {
        statistic,
        p_value,
        method: format!("friedman chi-square, {k} raters, {n} items, tie-corrected"),
    })
}

/// Signed differences reduced to (midrank of |d|, d > 0) with zeros dropped,
/// plus the tie sum over |d| used by the variance correction.
fn signed_ranks(diffs: &[f64]) -> (Vec<(f64, bool)>, usize, f64) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let zeros = diffs.len() - nonzero.len();
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&magnitudes);
    let pairs = ranks
        .into_iter()
        .zip(nonzero.iter().map(|d| *d > 0.0))
        .collect();
    (pairs, zeros, tie_correction_sum(&magnitudes))
}

/// Two-sided exact p-value for W+ = `w_plus` by dynamic programming over
/// all 2^m equally likely sign assignments. Mid-ranks are handled by
/// doubling, which makes every rank integral.
fn exact_two_sided_p(ranks: &[f64], w_plus: f64) -> f64 {
    let m = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reachable = 0usize;
    for &rank in &doubled {
        reachable += rank;
        for s in (0..=reachable).rev() {
            if s >= rank && counts[s - rank] > 0 {
                counts[s] += counts[s - rank];
            }
        }
    }
    let w2 = (2.0 * w_plus).round() as usize;
    let assignments = 2f64.powi(m as i32);
    let below: u64 = counts[..=w2].iter().sum();
    let above: u64 = counts[w2..].iter().sum();
    let p_le = below as f64 / assignments;
    let p_ge = above as f64 / assignments;
    (2.0 * p_le.min(p_ge)).min(1.0)
}

const EXACT_LIMIT: usize = 25;

/// Wilcoxon signed-rank test on d = reference - candidate of a pair.
pub fn wilcoxon_signed_rank(pair: &PairedRatings) -> Result<TestResult, HypothesisError> {
    if pair.is_empty() {
        return Err(HypothesisError::InsufficientData { needed: 1, got: 0 });
    }
    wilcoxon_from_differences(&pair.differences())
}

/// Wilcoxon signed-rank test on raw differences. Zero differences are
/// dropped; the statistic is W+, the positive-rank sum. The p-value is
/// exact (full sign-assignment distribution) when at most [`EXACT_LIMIT`]
/// nonzero differences remain, otherwise a normal approximation with tie
/// and continuity correction. All differences zero gives p = 1.
pub fn wilcoxon_from_differences(diffs: &[f64]) -> Result<TestResult, HypothesisError> {
    if diffs.is_empty() {
        return Err(HypothesisError::InsufficientData { needed: 1, got: 0 });
    }
    let (ranked, zeros, _) = signed_ranks(diffs);
    if ranked.len() <= EXACT_LIMIT {
        wilcoxon_exact_from_differences(diffs)
    } else {
        wilcoxon_approx_from_differences(diffs)
    }
    .map(|mut result| {
        result.method.push_str(&format!(", {zeros} zero difference(s) dropped"));
        result
    })
}

/// Exact-path Wilcoxon; errors when more than [`EXACT_LIMIT`] nonzero
/// differences remain. Exposed so the exact and approximate paths can be
/// compared directly.
pub fn wilcoxon_exact_from_differences(diffs: &[f64]) -> Result<TestResult, HypothesisError> {
    if diffs.is_empty() {
        return Err(HypothesisError::InsufficientData { needed: 1, got: 0 });
    }
    let (ranked, _, _) = signed_ranks(diffs);
    let m = ranked.len();
    if m == 0 {
        return Ok(all_zero_result(diffs.len()));
    }
    if m > EXACT_LIMIT {
        return Err(HypothesisError::Parameter(format!(
            "exact path limited to {EXACT_LIMIT} nonzero differences, got {m}"
        )));
    }
    let ranks: Vec<f64> = ranked.iter().map(|(r, _)| *r).collect();
    let w_plus: f64 = ranked.iter().filter(|(_, pos)| *pos).map(|(r, _)| r).sum();
    let p_value = exact_two_sided_p(&ranks, w_plus);
    Ok(TestResult {
        statistic: w_plus,
        p_value,
        method: format!("wilcoxon signed-rank, exact sign-assignment distribution, m={m}"),
    })
}

/// Normal-approximation Wilcoxon with tie correction and a 0.5 continuity
/// correction toward the mean.
pub fn wilcoxon_approx_from_differences(diffs: &[f64]) -> Result<TestResult, HypothesisError> {
    if diffs.is_empty() {
        return Err(HypothesisError::InsufficientData { needed: 1, got: 0 });
    }
    let (ranked, _, tie_sum) = signed_ranks(diffs);
    let m = ranked.len();
    if m == 0 {
        return Ok(all_zero_result(diffs.len()));
    }
    let mf = m as f64;
    let w_plus: f64 = ranked.iter().filter(|(_, pos)| *pos).map(|(r, _)| r).sum();
    let mean = mf * (mf + 1.0) / 4.0;
    let variance = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_sum / 48.0;
    let offset = w_plus - mean;
    let p_value = if offset == 0.0 {
        1.0
    } else {
        let continuity = 0.5 * offset.signum();
        let z = (offset - continuity) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * normal.cdf(-z.abs())).min(1.0)
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value,
        method: format!(
            "wilcoxon signed-rank, normal approximation with tie and continuity correction, m={m}"
        ),
    })
}

fn all_zero_result(n: usize) -> TestResult {
    TestResult {
        statistic: 0.0,
        p_value: 1.0,
        method: format!("wilcoxon signed-rank, all {n} difference(s) zero, p=1 by convention"),
    }
}

/// Bonferroni correction: min(1, m * p) for a family of m comparisons.
pub fn bonferroni(p: f64, m: usize) -> Result<f64, HypothesisError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(HypothesisError::Parameter(format!(
            "p-value {p} outside [0, 1]"
        )));
    }
    if m < 1 {
        return Err(HypothesisError::Parameter("family size m must be >= 1".into()));
    }
    Ok((p * m as f64).min(1.0))
}

/// Paired t-based TOST on d = reference - candidate.
pub fn tost_equivalence(
    pair: &PairedRatings,
    margin: f64,
    alpha: f64,
) -> Result<TostResult, HypothesisError> {
    tost_from_differences(&pair.differences(), margin, alpha)
}

/// TOST from raw paired differences.
pub fn tost_from_differences(
    diffs: &[f64],
    margin: f64,
    alpha: f64,
) -> Result<TostResult, HypothesisError> {
    if diffs.len() < 2 {
        return Err(HypothesisError::InsufficientData {
            needed: 2,
            got: diffs.len(),
        });
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    tost_from_summary(mean, sd, diffs.len(), margin, alpha)
}

/// TOST from summary statistics of the differences: t_lower tests
/// H0: mean <= -margin, t_upper tests H0: mean >= +margin, each at level
/// alpha with n-1 degrees of freedom; equivalence needs both rejected.
///
/// With zero difference SD the t statistics are undefined; equivalence then
/// degenerates to |mean| < margin, with p-values pinned to 0 or 1 so the
/// `equivalent <=> p_value < alpha` invariant still holds.
pub fn tost_from_summary(
    mean_diff: f64,
    sd_diff: f64,
    n: usize,
    margin: f64,
    alpha: f64,
) -> Result<TostResult, HypothesisError> {
    if margin <= 0.0 {
        return Err(HypothesisError::Parameter(format!(
            "margin must be positive, got {margin}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(HypothesisError::Parameter(format!(
            "alpha must be inside (0, 1), got {alpha}"
        )));
    }
    if n < 2 {
        return Err(HypothesisError::InsufficientData { needed: 2, got: n });
    }
    if sd_diff < 0.0 {
        return Err(HypothesisError::Parameter(format!(
            "sd must be nonnegative, got {sd_diff}"
        )));
    }

    let (p_lower, p_upper) = if sd_diff == 0.0 {
        (
            if mean_diff > -margin { 0.0 } else { 1.0 },
            if mean_diff < margin { 0.0 } else { 1.0 },
        )
    } else {
        let se = sd_diff / (n as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("n >= 2");
        (
            t.sf((mean_diff + margin) / se),
            t.sf((margin - mean_diff) / se),
        )
    };
    let p_value = p_lower.max(p_upper);
    Ok(TostResult {
        margin,
        alpha,
        p_lower,
        p_upper,
        p_value,
        equivalent: p_value < alpha,
    })
}
