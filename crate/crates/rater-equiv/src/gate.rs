//! The nine-criterion equivalence gate.
//!
//! A candidate rater is compared against the expert-expert baseline on the
//! same metric and items: four agreement statistics must reach (1 - t)
//! times the baseline, error and bias must stay within (1 + t) times the
//! baseline, the limits-of-agreement band must fall inside a two-sided
//! (1 +/- t) band, TOST must declare equivalence, and the corrected
//! Wilcoxon test must not detect a rating shift. The tests-passed count
//! out of nine is the headline comparison across raters and runs.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::agreement::AgreementSummary;
use crate::hypothesis::TostResult;
use crate::numfmt::round_half_away;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("{0}")]
    Parameter(String),
    #[error("baseline statistic undefined for criterion {criterion}")]
    UndefinedBaseline { criterion: String },
    #[error("gate table line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Gate parameters. `tolerance` is the relative band around each baseline
/// statistic; `printed_precision` optionally rounds each derived threshold
/// to that many decimals (half away from zero), which is how thresholds
/// behave when the inputs being replayed were themselves printed at fixed
/// precision. `None` compares at full precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateConfig {
    pub tolerance: f64,
    pub tost_margin: f64,
    pub alpha: f64,
    pub bonferroni_m: usize,
    pub printed_precision: Option<u32>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            tolerance: 0.20,
            tost_margin: 1.0,
            alpha: 0.05,
            bonferroni_m: 1,
            printed_precision: None,
        }
    }
}

impl GateConfig {
    /// Configuration for replaying published two-decimal tables: default
    /// parameters with thresholds rounded to two decimals.
    pub fn replay() -> Self {
        GateConfig {
            printed_precision: Some(2),
            ..GateConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(GateError::Parameter(format!(
                "tolerance must be inside (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.tost_margin <= 0.0 {
            return Err(GateError::Parameter(format!(
                "tost margin must be positive, got {}",
                self.tost_margin
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GateError::Parameter(format!(
                "alpha must be inside (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bonferroni_m < 1 {
            return Err(GateError::Parameter(
                "bonferroni family size must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn threshold(&self, raw: f64) -> f64 {
        match self.printed_precision {
            Some(decimals) => round_half_away(raw, decimals),
            None => raw,
        }
    }
}

/// The scalar statistics one gate evaluation consumes per side.
/// `sd_band` is the half-width of the limits-of-agreement band, 1.96 * sd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateInputs {
    pub kappa: f64,
    pub icc: f64,
    pub mae: f64,
    pub bias: f64,
    pub sd_band: f64,
    pub tost_equivalent: bool,
    pub wilcoxon_p_corrected: f64,
    pub spearman_rho: f64,
    pub jaccard_auc: f64,
}

/// Full per-pair statistics as computed from ratings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStats {
    pub agreement: AgreementSummary,
    pub tost: TostResult,
    pub wilcoxon_p_corrected: f64,
    pub jaccard_auc: f64,
}

impl PairStats {
    pub fn inputs(&self) -> GateInputs {
        GateInputs {
            kappa: self.agreement.kappa,
            icc: self.agreement.icc,
            mae: self.agreement.mae,
            bias: self.agreement.bland_altman.bias,
            sd_band: self.agreement.bland_altman.half_band(),
            tost_equivalent: self.tost.equivalent,
            wilcoxon_p_corrected: self.wilcoxon_p_corrected,
            spearman_rho: self.agreement.spearman_rho,
            jaccard_auc: self.jaccard_auc,
        }
    }
}

/// One boolean per criterion, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GateFlags {
    pub kappa: bool,
    pub icc: bool,
    pub mae: bool,
    pub ba_bias: bool,
    pub ba_loa: bool,
    pub tost: bool,
    pub wilcoxon: bool,
    pub spearman: bool,
    pub jaccard_auc: bool,
}

impl GateFlags {
    pub fn passed(&self) -> u8 {
        self.iter_named().iter().filter(|(_, flag)| *flag).count() as u8
    }

    /// Criterion names with their flags, in reporting order.
    pub fn iter_named(&self) -> [(&'static str, bool); 9] {
        [
            ("kappa", self.kappa),
            ("icc", self.icc),
            ("mae", self.mae),
            ("ba_bias", self.ba_bias),
            ("ba_loa", self.ba_loa),
            ("tost", self.tost),
            ("wilcoxon", self.wilcoxon),
            ("spearman", self.spearman),
            ("jaccard_auc", self.jaccard_auc),
        ]
    }
}

/// Gate verdict for one candidate-baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub flags: GateFlags,
    pub passed: u8,
    pub baseline: GateInputs,
    pub warnings: Vec<String>,
}

/// Tests-passed counts pooled across runs of the same comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunAggregate {
    pub passed: Vec<u8>,
    pub mean_passed: f64,
}

fn require_finite(value: f64, criterion: &str) -> Result<f64, GateError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(GateError::UndefinedBaseline {
            criterion: criterion.to_string(),
        })
    }
}

/// Evaluate the nine criteria for a candidate against the baseline.
pub fn evaluate_gate(
    candidate: &PairStats,
    baseline: &PairStats,
    config: &GateConfig,
) -> Result<GateReport, GateError> {
    evaluate_gate_inputs(&candidate.inputs(), &baseline.inputs(), config)
}

/// Evaluate the nine criteria from scalar inputs (t = config.tolerance):
///
/// 1. kappa >= (1-t) * baseline kappa
/// 2. icc >= (1-t) * baseline icc
/// 3. mae <= (1+t) * baseline mae
/// 4. |bias| <= (1+t) * |baseline bias|
/// 5. (1-t) * baseline band <= band <= (1+t) * baseline band
/// 6. TOST equivalent
/// 7. corrected Wilcoxon p > alpha for the candidate, or already for the
///    baseline itself (experts who differ no more than chance set a bar
///    every candidate meets; the published counts credit this criterion
///    metric-wide in that situation)
/// 8. spearman >= (1-t) * baseline spearman
/// 9. jaccard AUC >= (1-t) * baseline AUC
///
/// All comparisons are inclusive. A baseline at or below zero makes the
/// (1-t) scaling meaningless for kappa/icc/spearman/AUC; those criteria
/// then pass vacuously and a warning records it.
pub fn evaluate_gate_inputs(
    candidate: &GateInputs,
    baseline: &GateInputs,
    config: &GateConfig,
) -> Result<GateReport, GateError> {
    config.validate()?;
    let t = config.tolerance;
    let mut warnings = Vec::new();

    let mut at_least = |name: &str, cand: f64, base: f64| -> Result<bool, GateError> {
        let base = require_finite(base, name)?;
        if base <= 0.0 {
            warnings.push(format!(
                "baseline {name} = {base} is not positive; criterion passes vacuously"
            ));
            return Ok(true);
        }
        Ok(cand >= config.threshold((1.0 - t) * base))
    };

    let kappa = at_least("kappa", candidate.kappa, baseline.kappa)?;
    let icc = at_least("icc", candidate.icc, baseline.icc)?;
    let spearman = at_least("spearman", candidate.spearman_rho, baseline.spearman_rho)?;
    let jaccard_auc = at_least("jaccard_auc", candidate.jaccard_auc, baseline.jaccard_auc)?;

    let mae = candidate.mae <= config.threshold((1.0 + t) * require_finite(baseline.mae, "mae")?);
    let ba_bias = candidate.bias.abs()
        <= config.threshold((1.0 + t) * require_finite(baseline.bias, "ba_bias")?.abs());
    let base_band = require_finite(baseline.sd_band, "ba_loa")?;
    let ba_loa = candidate.sd_band >= config.threshold((1.0 - t) * base_band)
        && candidate.sd_band <= config.threshold((1.0 + t) * base_band);
    let tost = candidate.tost_equivalent;
    let wilcoxon = candidate.wilcoxon_p_corrected > config.alpha
        || require_finite(baseline.wilcoxon_p_corrected, "wilcoxon")? > config.alpha;

    let flags = GateFlags {
        kappa,
        icc,
        mae,
        ba_bias,
        ba_loa,
        tost,
        wilcoxon,
        spearman,
        jaccard_auc,
    };
    Ok(GateReport {
        flags,
        passed: flags.passed(),
        baseline: *baseline,
        warnings,
    })
}

/// Pool the tests-passed counts of one comparison across runs.
pub fn aggregate_runs(reports: &[GateReport]) -> Result<RunAggregate, GateError> {
    if reports.is_empty() {
        return Err(GateError::Parameter(
            "cannot aggregate an empty report list".into(),
        ));
    }
    let passed: Vec<u8> = reports.iter().map(|r| r.passed).collect();
    let mean_passed = passed.iter().map(|p| *p as f64).sum::<f64>() / passed.len() as f64;
    Ok(RunAggregate { passed, mean_passed })
}

/// One row of a gate table: a named rater pair with its statistics and,
/// when replaying a published table, the published tests-passed count.
/// The baseline row is the one row whose TOST column is the "--" marker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateRow {
    pub expert: String,
    pub candidate: String,
    pub inputs: GateInputs,
    pub published_passed: Option<u8>,
    pub is_baseline: bool,
}

pub const GATE_CSV_HEADER: &str =
    "expert,candidate,kappa,icc,mae,bias,loa,tost,spearman,wilcoxon_p_corr,jaccard_auc,tests_passed";

fn parse_field<T: std::str::FromStr>(
    field: &str,
    name: &str,
    line: usize,
) -> Result<T, GateError> {
    field.trim().parse().map_err(|_| GateError::Schema {
        line,
        msg: format!("cannot parse {name} from {field:?}"),
    })
}

/// Load gate rows from CSV in the [`GATE_CSV_HEADER`] schema. The `tost`
/// column takes True/False or the baseline marker `--` (or empty); the
/// `tests_passed` column takes `N/9`, a bare count, or `--`/empty.
pub fn load_gate_rows(path: &Path) -> Result<Vec<GateRow>, GateError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != GATE_CSV_HEADER {
        return Err(GateError::Schema {
            line: 1,
            msg: format!("header must be {GATE_CSV_HEADER:?}, got {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let line = index + 2;
        let record = record?;
        if record.len() != 12 {
            return Err(GateError::Schema {
                line,
                msg: format!("expected 12 fields, got {}", record.len()),
            });
        }
        let tost_field = record[7].trim();
        let (tost_equivalent, is_baseline) = match tost_field {
            "--" | "" => (false, true),
            "True" | "true" => (true, false),
            "False" | "false" => (false, false),
            other => {
                return Err(GateError::Schema {
                    line,
                    msg: format!("tost must be True/False/--, got {other:?}"),
                })
            }
        };
        let passed_field = record[11].trim();
        let published_passed = match passed_field {
            "--" | "" => None,
            value => {
                let count = value.strip_suffix("/9").unwrap_or(value);
                Some(parse_field::<u8>(count, "tests_passed", line)?)
            }
        };
        if is_baseline != published_passed.is_none() {
            return Err(GateError::Schema {
                line,
                msg: "baseline marker `--` must appear in both tost and tests_passed".into(),
            });
        }
        rows.push(GateRow {
            expert: record[0].to_string(),
            candidate: record[1].to_string(),
            inputs: GateInputs {
                kappa: parse_field(&record[2], "kappa", line)?,
                icc: parse_field(&record[3], "icc", line)?,
                mae: parse_field(&record[4], "mae", line)?,
                bias: parse_field(&record[5], "bias", line)?,
                sd_band: parse_field(&record[6], "loa", line)?,
                tost_equivalent,
                spearman_rho: parse_field(&record[8], "spearman", line)?,
                wilcoxon_p_corrected: parse_field(&record[9], "wilcoxon_p_corr", line)?,
                jaccard_auc: parse_field(&record[10], "jaccard_auc", line)?,
            },
            published_passed,
            is_baseline,
        });
    }
    Ok(rows)
}

/// Split loaded rows into the unique baseline row and the candidate rows,
/// preserving candidate order.
pub fn partition_baseline(rows: Vec<GateRow>) -> Result<(GateRow, Vec<GateRow>), GateError> {
    let baseline_count = rows.iter().filter(|r| r.is_baseline).count();
    if baseline_count != 1 {
        return Err(GateError::Parameter(format!(
            "expected exactly one baseline row (tost = --), found {baseline_count}"
        )));
    }
    let mut baseline = None;
    let mut candidates = Vec::with_capacity(rows.len() - 1);
    for row in rows {
        if row.is_baseline {
            baseline = Some(row);
        } else {
            candidates.push(row);
        }
    }
    Ok((baseline.expect("counted above"), candidates))
}

/// Write gate rows in the [`GATE_CSV_HEADER`] schema with two-decimal
/// statistics and two-digit-mantissa scientific Wilcoxon p-values.
pub fn write_gate_csv(rows: &[GateRow], path: &Path) -> Result<(), GateError> {
    let mut out = String::from(GATE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let tost = if row.is_baseline {
            "--".to_string()
        } else if row.inputs.tost_equivalent {
            "True".to_string()
        } else {
            "False".to_string()
        };
        let passed = match row.published_passed {
            Some(count) => format!("{count}/9"),
            None => "--".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.expert,
            row.candidate,
            crate::numfmt::fmt_fixed(row.inputs.kappa, 2),
            crate::numfmt::fmt_fixed(row.inputs.icc, 2),
            crate::numfmt::fmt_fixed(row.inputs.mae, 2),
            crate::numfmt::fmt_fixed(row.inputs.bias, 2),
            crate::numfmt::fmt_fixed(row.inputs.sd_band, 2),
            tost,
            crate::numfmt::fmt_fixed(row.inputs.spearman_rho, 2),
            crate::numfmt::fmt_scientific2(row.inputs.wilcoxon_p_corrected),
            crate::numfmt::fmt_fixed(row.inputs.jaccard_auc, 2),
            passed,
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(
        kappa: f64,
        icc: f64,
        mae: f64,
        bias: f64,
        sd_band: f64,
        tost: bool,
        wilcoxon: f64,
        spearman: f64,
        auc: f64,
    ) -> GateInputs {
        GateInputs {
            kappa,
            icc,
            mae,
            bias,
            sd_band,
            tost_equivalent: tost,
            wilcoxon_p_corrected: wilcoxon,
            spearman_rho: spearman,
            jaccard_auc: auc,
        }
    }

    fn strong_baseline() -> GateInputs {
        inputs(0.54, 0.54, 1.10, 0.33, 2.85, false, 2.11e-9, 0.54, 0.64)
    }

    #[test]
    fn identical_candidate_passes_everything() {
        let mut candidate = strong_baseline();
        candidate.tost_equivalent = true;
        candidate.wilcoxon_p_corrected = 1.0;
        for tolerance in [0.05, 0.2, 0.5, 0.95] {
            let config = GateConfig {
                tolerance,
                ..GateConfig::default()
            };
            let report =
                evaluate_gate_inputs(&candidate, &strong_baseline(), &config).unwrap();
            assert_eq!(report.passed, 9, "tolerance {tolerance}");
        }
    }

    #[test]
    fn strong_candidate_misses_only_wilcoxon() {
        // A close novice against the strong baseline: all bands met, but
        // the Wilcoxon p stays far below alpha on both sides.
        let candidate = inputs(0.49, 0.49, 1.17, -0.31, 3.01, true, 1.41e-8, 0.48, 0.63);
        let report =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &GateConfig::replay()).unwrap();
        assert_eq!(report.passed, 8);
        assert!(!report.flags.wilcoxon);
    }

    #[test]
    fn best_novice_reaches_nine() {
        let candidate = inputs(0.51, 0.51, 1.04, -0.10, 2.67, true, 1.22e-1, 0.50, 0.64);
        let report =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &GateConfig::replay()).unwrap();
        assert_eq!(report.passed, 9);
    }

    #[test]
    fn weak_candidate_passes_three() {
        // No-demonstration judge against the strong baseline: only the
        // limits-of-agreement band, rank correlation, and overlap AUC
        // criteria survive.
        let candidate = inputs(0.24, 0.24, 1.58, -1.33, 2.75, false, 3.17e-92, 0.43, 0.61);
        let report =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &GateConfig::replay()).unwrap();
        assert_eq!(report.passed, 3);
        assert!(report.flags.ba_loa);
        assert!(report.flags.spearman);
        assert!(report.flags.jaccard_auc);
    }

    #[test]
    fn rounded_thresholds_differ_from_full_precision_at_the_edge() {
        // spearman 0.43 against 0.8 * 0.54 = 0.432: fails at full
        // precision, passes when the threshold is printed at two decimals.
        let candidate = inputs(0.24, 0.24, 1.58, -1.33, 2.75, false, 3.17e-92, 0.43, 0.61);
        let full = evaluate_gate_inputs(&candidate, &strong_baseline(), &GateConfig::default())
            .unwrap();
        assert!(!full.flags.spearman);
        let rounded =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &GateConfig::replay()).unwrap();
        assert!(rounded.flags.spearman);
    }

    #[test]
    fn baseline_wilcoxon_above_alpha_credits_all_candidates() {
        let mut baseline = strong_baseline();
        baseline.wilcoxon_p_corrected = 1.0;
        let candidate = inputs(0.34, 0.35, 1.60, -1.21, 1.65, false, 4.77e-68, 0.45, 0.62);
        let report = evaluate_gate_inputs(&candidate, &baseline, &GateConfig::replay()).unwrap();
        assert!(report.flags.wilcoxon);
    }

    #[test]
    fn nonpositive_baseline_passes_vacuously_with_warning() {
        let mut baseline = strong_baseline();
        baseline.kappa = -0.05;
        let mut candidate = strong_baseline();
        candidate.kappa = -0.50;
        let report =
            evaluate_gate_inputs(&candidate, &baseline, &GateConfig::default()).unwrap();
        assert!(report.flags.kappa);
        assert!(report.warnings.iter().any(|w| w.contains("kappa")));
    }

    #[test]
    fn nan_baseline_names_the_criterion() {
        let mut baseline = strong_baseline();
        baseline.icc = f64::NAN;
        let err = evaluate_gate_inputs(&strong_baseline(), &baseline, &GateConfig::default())
            .unwrap_err();
        match err {
            GateError::UndefinedBaseline { criterion } => assert_eq!(criterion, "icc"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tolerance_growth_never_revokes_threshold_flags() {
        let candidate = inputs(0.42, 0.42, 1.19, 0.55, 2.98, true, 2.81e-23, 0.44, 0.63);
        let tight = GateConfig {
            tolerance: 0.10,
            ..GateConfig::default()
        };
        let loose = GateConfig {
            tolerance: 0.40,
            ..GateConfig::default()
        };
        let report_tight =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &tight).unwrap();
        let report_loose =
            evaluate_gate_inputs(&candidate, &strong_baseline(), &loose).unwrap();
        for ((name, was), (_, is)) in report_tight
            .flags
            .iter_named()
            .iter()
            .zip(report_loose.flags.iter_named().iter())
        {
            if *name == "tost" || *name == "wilcoxon" {
                continue;
            }
            assert!(!was | is, "{name} regressed when tolerance grew");
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = GateConfig {
            tolerance: 0.0,
            ..GateConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GateConfig {
            alpha: 1.0,
            ..GateConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GateConfig {
            tost_margin: -2.0,
            ..GateConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn aggregate_examples() {
        let report = |passed: u8| GateReport {
            flags: GateFlags {
                kappa: false,
                icc: false,
                mae: false,
                ba_bias: false,
                ba_loa: false,
                tost: false,
                wilcoxon: false,
                spearman: false,
                jaccard_auc: false,
            },
            passed,
            baseline: strong_baseline(),
            warnings: Vec::new(),
        };
        let agg = aggregate_runs(&[report(8), report(8), report(8)]).unwrap();
        assert_eq!(agg.mean_passed, 8.0);
        let agg = aggregate_runs(&[report(9), report(8), report(9)]).unwrap();
        assert!((agg.mean_passed - 26.0 / 3.0).abs() < 1e-12);
        assert_eq!(crate::numfmt::fmt_fixed(agg.mean_passed, 2), "8.67");
        let agg = aggregate_runs(&[report(3), report(2), report(2)]).unwrap();
        assert_eq!(crate::numfmt::fmt_fixed(agg.mean_passed, 2), "2.33");
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn gate_csv_round_trip() {
        let rows = vec![
            GateRow {
                expert: "expert_1".into(),
                candidate: "expert_2".into(),
                inputs: strong_baseline(),
                published_passed: None,
                is_baseline: true,
            },
            GateRow {
                expert: "expert_1".into(),
                candidate: "trained_novice_3".into(),
                inputs: inputs(0.51, 0.51, 1.04, -0.10, 2.67, true, 1.22e-1, 0.50, 0.64),
                published_passed: Some(9),
                is_baseline: false,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gate.csv");
        write_gate_csv(&rows, &path).unwrap();
        let loaded = load_gate_rows(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!(loaded[0].is_baseline);
        assert_eq!(loaded[1].published_passed, Some(9));
        assert_eq!(loaded[1].inputs.kappa, 0.51);
        assert_eq!(loaded[1].inputs.wilcoxon_p_corrected, 1.22e-1);
        let (baseline, candidates) = partition_baseline(loaded).unwrap();
        assert_eq!(baseline.candidate, "expert_2");
        assert_eq!(candidates.len(), 1);
    }

    #[test]
    fn gate_csv_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "expert,candidate,nope\n").unwrap();
        assert!(matches!(
            load_gate_rows(&path),
            Err(GateError::Schema { line: 1, .. })
        ));
        std::fs::write(
            &path,
            format!("{GATE_CSV_HEADER}\ne1,c1,0.5,0.5,1.0,0.1,2.5,Maybe,0.5,0.5,0.6,3/9\n"),
        )
        .unwrap();
        assert!(matches!(
            load_gate_rows(&path),
            Err(GateError::Schema { line: 2, .. })
        ));
    }
}
