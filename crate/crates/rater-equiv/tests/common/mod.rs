//! Brute-force reference implementations used to cross-check the library.
//!
//! Every function here deliberately takes a different computational route
//! than the library: raw squared-distance disagreement weights instead of
//! normalized agreement weights, explicit ANOVA sum-of-squares loops,
//! counting-based ranks, full sign enumeration, the rank-sum quotient form
//! of the Friedman statistic, and numerical quadrature for the Student-t
//! tail. Agreement between the two routes is the evidence.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rater_equiv::{ItemId, PairedRatings};

// ---------------------------------------------------------------------------
// Agreement statistics
// ---------------------------------------------------------------------------

/// Quadratic-weighted kappa in disagreement form with raw (i-j)^2 weights:
/// kappa = 1 - sum(d_ij O_ij) / sum(d_ij E_ij), where O is the observed
/// contingency table over the declared scale and E the product of margins
/// divided by n. The normalization constant cancels in the ratio.
pub fn kappa_oracle(pair: &PairedRatings) -> f64 {
    let k = pair.scale.len();
    let min = pair.scale.min;
    let n = pair.len() as f64;
    let mut observed = vec![vec![0.0_f64; k]; k];
    for idx in 0..pair.len() {
        let i = (pair.a[idx] - min) as usize;
        let j = (pair.b[idx] - min) as usize;
        observed[i][j] += 1.0;
    }
    let row_sums: Vec<f64> = observed.iter().map(|row| row.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..k).map(|j| observed.iter().map(|row| row[j]).sum()).collect();
    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            let distance = (i as f64 - j as f64).powi(2);
            weighted_observed += distance * observed[i][j];
            weighted_expected += distance * row_sums[i] * col_sums[j] / n;
        }
    }
    1.0 - weighted_observed / weighted_expected
}

/// ICC(2,1) from the two-way ANOVA decomposition written out longhand:
/// compute every sum of squares from the data grid, then
/// (MSR - MSE) / (MSR + (k-1) MSE + k (MSC - MSE) / n).
pub fn icc_oracle(pair: &PairedRatings) -> f64 {
    let n = pair.len();
    let k = 2usize;
    let grid: Vec<[f64; 2]> = (0..n)
        .map(|i| [pair.a[i] as f64, pair.b[i] as f64])
        .collect();
    let total: f64 = grid.iter().map(|row| row[0] + row[1]).sum();
    let grand = total / (n * k) as f64;
    let mut ss_rows = 0.0;
    let mut ss_total = 0.0;
    for row in &grid {
        let row_mean = (row[0] + row[1]) / k as f64;
        ss_rows += k as f64 * (row_mean - grand).powi(2);
        for value in row {
            ss_total += (value - grand).powi(2);
        }
    }
    let mut ss_cols = 0.0;
    for col in 0..k {
        let col_mean: f64 = grid.iter().map(|row| row[col]).sum::<f64>() / n as f64;
        ss_cols += n as f64 * (col_mean - grand).powi(2);
    }
    let ss_error = ss_total - ss_rows - ss_cols;
    let ms_rows = ss_rows / (n - 1) as f64;
    let ms_cols = ss_cols / (k - 1) as f64;
    let ms_error = ss_error / ((n - 1) * (k - 1)) as f64;
    (ms_rows - ms_error)
        / (ms_rows + (k - 1) as f64 * ms_error + k as f64 * (ms_cols - ms_error) / n as f64)
}

pub fn mae_oracle(pair: &PairedRatings) -> f64 {
    let total: f64 = (0..pair.len())
        .map(|i| (pair.a[i] as f64 - pair.b[i] as f64).abs())
        .sum();
    total / pair.len() as f64
}

/// Mid-ranks by counting: rank(x) = #(y < x) + (#(y == x) + 1) / 2.
fn counting_ranks(values: &[i32]) -> Vec<f64> {
    values
        .iter()
        .map(|x| {
            let below = values.iter().filter(|y| **y < *x).count() as f64;
            let equal = values.iter().filter(|y| **y == *x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Spearman rho as the Pearson correlation of counting-based mid-ranks.
pub fn spearman_oracle(pair: &PairedRatings) -> f64 {
    let ra = counting_ranks(&pair.a);
    let rb = counting_ranks(&pair.b);
    let n = ra.len() as f64;
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..ra.len() {
        let da = ra[i] - mean_a;
        let db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

/// Bland-Altman bias and sample SD of d = b - a, written out longhand.
pub fn bland_altman_oracle(pair: &PairedRatings) -> (f64, f64) {
    let n = pair.len();
    let diffs: Vec<f64> = (0..n).map(|i| (pair.b[i] - pair.a[i]) as f64).collect();
    let bias = diffs.iter().sum::<f64>() / n as f64;
    let ss: f64 = diffs.iter().map(|d| (d - bias).powi(2)).sum();
    (bias, (ss / (n - 1) as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Hypothesis tests
// ---------------------------------------------------------------------------

/// Exact two-sided Wilcoxon signed-rank p by enumerating all 2^m sign
/// assignments of the absolute-difference mid-ranks.
pub fn wilcoxon_enumeration_oracle(diffs: &[f64]) -> f64 {
    let kept: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let m = kept.len();
    assert!(m > 0 && m <= 20, "enumeration oracle limited to 20 values");
    let magnitudes: Vec<f64> = kept.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = magnitudes
        .iter()
        .map(|x| {
            let below = magnitudes.iter().filter(|y| **y < *x).count() as f64;
            let equal = magnitudes.iter().filter(|y| **y == *x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = kept
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total = 1u64 << m;
    let mut at_most = 0u64;
    let mut at_least = 0u64;
    for mask in 0..total {
        let mut w_plus = 0.0;
        for bit in 0..m {
            if mask & (1 << bit) != 0 {
                w_plus += ranks[bit];
            }
        }
        if w_plus <= observed {
            at_most += 1;
        }
        if w_plus >= observed {
            at_least += 1;
        }
    }
    let p_low = at_most as f64 / total as f64;
    let p_high = at_least as f64 / total as f64;
    (2.0 * p_low.min(p_high)).min(1.0)
}

/// Tie-corrected Friedman statistic in rank-sum quotient form:
/// T = (k-1) * sum_j (R_j - n(k+1)/2)^2 / (A - C), with A the sum of all
/// squared within-item ranks and C = n k (k+1)^2 / 4.
pub fn friedman_oracle(columns: &[Vec<f64>]) -> f64 {
    let k = columns.len();
    let n = columns[0].len();
    let mut rank_sums = vec![0.0_f64; k];
    let mut squared_rank_total = 0.0;
    for item in 0..n {
        let row: Vec<f64> = columns.iter().map(|c| c[item]).collect();
        let ranks: Vec<f64> = row
            .iter()
            .map(|x| {
                let below = row.iter().filter(|y| **y < *x).count() as f64;
                let equal = row.iter().filter(|y| **y == *x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect();
        for (j, rank) in ranks.iter().enumerate() {
            rank_sums[j] += rank;
            squared_rank_total += rank * rank;
        }
    }
    let centre = n as f64 * (k as f64 + 1.0) / 2.0;
    let numerator: f64 = rank_sums.iter().map(|r| (r - centre).powi(2)).sum();
    let denominator = squared_rank_total - n as f64 * k as f64 * (k as f64 + 1.0).powi(2) / 4.0;
    if denominator <= 0.0 {
        return 0.0;
    }
    (k as f64 - 1.0) * numerator / denominator
}

/// Student-t upper tail P(T >= t) by Simpson quadrature of the density
/// under the substitution x = sqrt(df) tan(theta), which turns the density
/// into cos^(df-1)(theta) on (-pi/2, pi/2) and needs no gamma constants:
/// the tail is the ratio of two proper integrals.
pub fn t_tail_oracle(t: f64, df: f64) -> f64 {
    assert!(df >= 1.0);
    let integrand = |theta: f64| theta.cos().powf(df - 1.0);
    let simpson = |lo: f64, hi: f64, steps: usize| {
        // steps must be even.
        let h = (hi - lo) / steps as f64;
        let mut acc = integrand(lo) + integrand(hi);
        for i in 1..steps {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * integrand(lo + i as f64 * h);
        }
        acc * h / 3.0
    };
    let theta_t = (t / df.sqrt()).atan();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let steps = 400_000;
    let whole = simpson(-half_pi, half_pi, steps);
    let upper = simpson(theta_t, half_pi, steps);
    (upper / whole).clamp(0.0, 1.0)
}

/// One-sided TOST p-values from summary statistics via the quadrature
/// t-tail: (p_lower, p_upper) for margin delta.
pub fn tost_oracle(mean: f64, sd: f64, n: usize, delta: f64) -> (f64, f64) {
    let se = sd / (n as f64).sqrt();
    let df = (n - 1) as f64;
    let t_lower = (mean + delta) / se;
    let t_upper = (delta - mean) / se;
    (t_tail_oracle(t_lower, df), t_tail_oracle(t_upper, df))
}

// ---------------------------------------------------------------------------
// Top sets
// ---------------------------------------------------------------------------

/// Tie-inclusive top set by threshold enumeration: walk thresholds from the
/// highest rating downward and return the first at-threshold-or-above set
/// with at least `n_target` members.
pub fn top_set_threshold_oracle(
    ratings: &std::collections::BTreeMap<ItemId, i32>,
    n_target: usize,
) -> BTreeSet<ItemId> {
    assert!(n_target >= 1 && n_target <= ratings.len());
    let mut thresholds: Vec<i32> = ratings.values().copied().collect();
    thresholds.sort_unstable();
    thresholds.dedup();
    for threshold in thresholds.into_iter().rev() {
        let set: BTreeSet<ItemId> = ratings
            .iter()
            .filter(|(_, rating)| **rating >= threshold)
            .map(|(item, _)| item.clone())
            .collect();
        if set.len() >= n_target {
            return set;
        }
    }
    ratings.keys().cloned().collect()
}

pub fn jaccard_oracle(a: &BTreeSet<ItemId>, b: &BTreeSet<ItemId>) -> f64 {
    a.intersection(b).count() as f64 / a.union(b).count() as f64
}

/// Jaccard curve points by brute force: reference top set from threshold
/// enumeration at ceil(f * n), candidate top set at the realized reference
/// size, deduplicated on realized fraction (last wins) with the (1, 1)
/// anchor appended when missing. Returns (nominal, actual, jaccard) rows.
/// `reference_is_b` selects which side of the pair anchors the fraction.
pub fn jaccard_curve_oracle(
    pair: &PairedRatings,
    reference_is_b: bool,
    fractions: &[f64],
) -> Vec<(f64, f64, f64)> {
    let total = pair.len();
    let (ref_values, cand_values) = if reference_is_b {
        (&pair.b, &pair.a)
    } else {
        (&pair.a, &pair.b)
    };
    let reference: std::collections::BTreeMap<ItemId, i32> = pair
        .items
        .iter()
        .cloned()
        .zip(ref_values.iter().copied())
        .collect();
    let candidate: std::collections::BTreeMap<ItemId, i32> = pair
        .items
        .iter()
        .cloned()
        .zip(cand_values.iter().copied())
        .collect();
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for fraction in fractions {
        let n_target = ((fraction * total as f64).ceil() as usize).clamp(1, total);
        let ref_set = top_set_threshold_oracle(&reference, n_target);
        let cand_set = top_set_threshold_oracle(&candidate, ref_set.len().min(total));
        let actual = ref_set.len() as f64 / total as f64;
        points.push((*fraction, actual, jaccard_oracle(&ref_set, &cand_set)));
    }
    points.sort_by(|x, y| x.1.total_cmp(&y.1));
    let mut deduped: Vec<(f64, f64, f64)> = Vec::new();
    for point in points {
        if let Some(last) = deduped.last_mut() {
            if last.1 == point.1 {
                *last = point;
                continue;
            }
        }
        deduped.push(point);
    }
    if deduped.last().map(|p| p.1) != Some(1.0) {
        deduped.push((1.0, 1.0, 1.0));
    }
    deduped
}
