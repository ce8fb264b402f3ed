//! Pairwise agreement statistics between a candidate and a reference rater:
//! quadratic-weighted Cohen's kappa, ICC(2,1), mean absolute error, Spearman
//! rank correlation, and Bland-Altman bias with limits of agreement.
//!
//! Difference-based quantities use d = reference - candidate, so a candidate
//! that rates higher than the reference shows a negative bias.

use serde::Serialize;
use thiserror::Error;

use crate::rank::midranks;
use crate::ratings::PairedRatings;

/// Multiplier of the difference SD in the limits of agreement.
pub const LOA_FACTOR: f64 = 1.96;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} paired ratings, got {got}")]
    InsufficientData { needed: usize, got: usize },
    /// A constant rating vector has no rank variance, so Spearman rho does
    /// not exist. Reported explicitly, never coerced to zero.
    #[error("spearman rho undefined: {side} ratings are constant")]
    UndefinedCorrelation { side: &'static str },
}

/// Bias and limits of agreement between two raters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlandAltmanResult {
    /// Mean difference, reference minus candidate.
    pub bias: f64,
    /// Sample standard deviation of the differences (n-1 denominator).
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
}

impl BlandAltmanResult {
    /// Half-width of the limits of agreement, 1.96 * sd.
    pub fn half_band(&self) -> f64 {
        LOA_FACTOR * self.sd
    }
}

/// The agreement battery for one rater pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementSummary {
    pub kappa: f64,
    pub icc: f64,
    pub mae: f64,
    pub spearman_rho: f64,
    pub bland_altman: BlandAltmanResult,
}

impl AgreementSummary {
    /// Computes every statistic of the battery for one pair.
    pub fn compute(pair: &PairedRatings) -> Result<Self, StatsError> {
        Ok(Self {
            kappa: quadratic_weighted_kappa(pair)?,
            icc: icc_absolute_agreement(pair)?,
            mae: mean_absolute_error(pair)?,
            spearman_rho: spearman_rho(pair)?,
            bland_altman: bland_altman(pair)?,
        })
    }
}

fn require_n(pair: &PairedRatings, needed: usize) -> Result<(), StatsError> {
    if pair.len() < needed {
        return Err(StatsError::InsufficientData {
            needed,
            got: pair.len(),
        });
    }
    Ok(())
}

/// Quadratic-weighted Cohen's kappa on the K x K contingency table spanned
/// by the full declared scale, so unused categories still shape the expected
/// agreement. Weights are w_ij = 1 - (i-j)^2 / (K-1)^2.
///
/// When both raters are constant at the same value the expected and observed
/// weighted agreement are both 1 and kappa is returned as 1 by convention.
pub fn quadratic_weighted_kappa(pair: &PairedRatings) -> Result<f64, StatsError> {
    require_n(pair, 2)?;
    let k = pair.scale.len();
    let n = pair.len() as f64;
    let mut counts = vec![vec![0u32; k]; k];
    for (&a, &b) in pair.a.iter().zip(&pair.b) {
        counts[pair.scale.index_of(a)][pair.scale.index_of(b)] += 1;
    }
    let weight = |i: usize, j: usize| {
        let d = i as f64 - j as f64;
        1.0 - d * d / ((k - 1) as f64 * (k - 1) as f64)
    };
    let mut row_marginals = vec![0.0; k];
    let mut col_marginals = vec![0.0; k];
    let mut observed = 0.0;
    for i in 0..k {
        for j in 0..k {
            let cell = f64::from(counts[i][j]) / n;
            observed += weight(i, j) * cell;
            row_marginals[i] += cell;
            col_marginals[j] += cell;
        }
    }
    let mut expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            expected += weight(i, j) * row_marginals[i] * col_marginals[j];
        }
    }
    let chance_span = 1.0 - expected;
    if chance_span.abs() < 8.0 * f64::EPSILON {
        // Expected agreement 1 forces both marginals onto one shared
        // category, so observed agreement is 1 as well.
        return Ok(1.0);
    }
    Ok((observed - expected) / chance_span)
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater,
/// from the two-rater ANOVA mean squares. See [`icc_with_flag`] for the
/// degenerate-data indicator.
pub fn icc_absolute_agreement(pair: &PairedRatings) -> Result<f64, StatsError> {
    icc_with_flag(pair).map(|(value, _)| value)
}

/// ICC(2,1) plus a flag that is true when the data had zero total variance
/// (both raters constant and equal), where the ICC is 1 by convention.
pub fn icc_with_flag(pair: &PairedRatings) -> Result<(f64, bool), StatsError> {
    require_n(pair, 2)?;
    let n = pair.len() as f64;
    let k = 2.0;
    let grand: f64 = pair
        .a
        .iter()
        .chain(&pair.b)
        .map(|&x| f64::from(x))
        .sum::<f64>()
        / (n * k);
    let mean_a: f64 = pair.a.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let mean_b: f64 = pair.b.iter().map(|&x| f64::from(x)).sum::<f64>() / n;

    let mut ss_total = 0.0;
    let mut ss_rows = 0.0;
    for (&a, &b) in pair.a.iter().zip(&pair.b) {
        let (a, b) = (f64::from(a), f64::from(b));
        ss_total += (a - grand).powi(2) + (b - grand).powi(2);
        let row_mean = (a + b) / 2.0;
        ss_rows += k * (row_mean - grand).powi(2);
    }
    let ss_cols = n * ((mean_a - grand).powi(2) + (mean_b - grand).powi(2));
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);

    if ss_total < 8.0 * f64::EPSILON {
        return Ok((1.0, true));
    }
    let ms_rows = ss_rows / (n - 1.0);
    let ms_cols = ss_cols / (k - 1.0);
    let ms_err = ss_err / ((n - 1.0) * (k - 1.0));
    let denominator = ms_rows + (k - 1.0) * ms_err + k * (ms_cols - ms_err) / n;
    if denominator.abs() < 8.0 * f64::EPSILON {
        return Ok((1.0, true));
    }
    Ok(((ms_rows - ms_err) / denominator, false))
}

/// Mean absolute error (1/N) * sum |a_i - b_i|; symmetric in the two raters.
pub fn mean_absolute_error(pair: &PairedRatings) -> Result<f64, StatsError> {
    require_n(pair, 1)?;
    let total: f64 = pair
        .a
        .iter()
        .zip(&pair.b)
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
        .sum();
    Ok(total / pair.len() as f64)
}

/// Spearman rho: Pearson correlation of mid-ranks. Errors when either
/// vector is constant, where the correlation is undefined.
pub fn spearman_rho(pair: &PairedRatings) -> Result<f64, StatsError> {
    require_n(pair, 2)?;
    for (values, side) in [(&pair.a, "candidate"), (&pair.b, "reference")] {
        if values.iter().all(|&x| x == values[0]) {
            return Err(StatsError::UndefinedCorrelation { side });
        }
    }
    let to_f64 = |v: &[i32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    let ranks_a = midranks(&to_f64(&pair.a));
    let ranks_b = midranks(&to_f64(&pair.b));
    let n = pair.len() as f64;
    let mean_a = ranks_a.iter().sum::<f64>() / n;
    let mean_b = ranks_b.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (ra, rb) in ranks_a.iter().zip(&ranks_b) {
        let da = ra - mean_a;
        let db = rb - mean_b;
        covariance += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    Ok(covariance / (var_a.sqrt() * var_b.sqrt()))
}

/// Bias and limits of agreement of the differences d = reference - candidate:
/// bias = mean(d), sd = sample SD (n-1), limits = bias -/+ 1.96 * sd.
pub fn bland_altman(pair: &PairedRatings) -> Result<BlandAltmanResult, StatsError> {
    require_n(pair, 2)?;
    let diffs = pair.differences();
    let n = diffs.len() as f64;
    let bias = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - bias).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    Ok(BlandAltmanResult {
        bias,
        sd,
        loa_low: bias - LOA_FACTOR * sd,
        loa_high: bias + LOA_FACTOR * sd,
    })
}
