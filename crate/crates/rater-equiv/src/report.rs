//! Analysis orchestration: configuration, the analyze/judge/replay
//! commands, and report emission.
//!
//! Everything here is a thin, deterministic pipeline over the statistics
//! modules: load ratings, pair raters, compute the per-pair battery, gate
//! each candidate against the expert baseline, and write tables and plot
//! data with fixed ordering and formatting so reruns are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::{AgreementSummary, StatsError};
use crate::gate::{
    aggregate_runs, evaluate_gate_inputs, load_gate_rows, partition_baseline, write_gate_csv,
    GateConfig, GateError, GateReport, GateRow, PairStats, RunAggregate,
};
use crate::hypothesis::{bonferroni, tost_equivalence, wilcoxon_signed_rank, HypothesisError};
use crate::judge::cache::ResponseCache;
use crate::judge::client::{HttpModelClient, MockModelClient, ModelClient, RetryPolicy};
use crate::judge::descriptions::DescriptionStore;
use crate::judge::image::{self, ImagePayload};
use crate::judge::{
    run_judge, select_context, JudgeError, JudgeJob, JudgeOutcome, JudgeSetup, JudgeVariant,
    PromptTemplates, QueryTarget, DEFAULT_DEMO_COUNT,
};
use crate::numfmt::{fmt_fixed, fmt_scientific2};
use crate::ratings::{
    complete_case_filter, load_ratings_path, load_split_manifest, paired_vector,
    split_context_pool, write_ratings_csv, write_split_manifest, DatasetSplit, ItemId, Metric,
    PairedRatings, RaterId, RatingMatrix, RatingRecord, RatingScale, RatingsError,
};
use crate::topset::{jaccard_curve, write_curve_csv, JaccardCurve, PairSide, TopSetError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Ratings(#[from] RatingsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    TopSet(#[from] TopSetError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<ReportError>,
    },
}

/// Attach metric/run/pair context to any error bubbling out of a closure.
fn with_context<T>(
    context: impl FnOnce() -> String,
    result: Result<T, ReportError>,
) -> Result<T, ReportError> {
    result.map_err(|source| ReportError::Context {
        context: context(),
        source: Box::new(source),
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_expert_a() -> String {
    "expert_1".to_string()
}

fn default_expert_b() -> String {
    "expert_2".to_string()
}

fn default_runs() -> Vec<RunSpec> {
    (1..=3)
        .map(|n| RunSpec {
            id: n,
            seed: n,
            ratings: Vec::new(),
        })
        .collect()
}

/// Twenty nominal fractions 0.05, 0.10, ..., 1.00.
pub fn default_fraction_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

fn default_pool_size() -> usize {
    50
}

fn default_split_seed() -> u64 {
    7
}

fn default_variant() -> String {
    "text_image".to_string()
}

fn default_model() -> String {
    "vlm-judge".to_string()
}

fn default_reasoning_model() -> String {
    "vlm-judge-reasoner".to_string()
}

fn default_base_url() -> String {
    "https://api.example.com/v1".to_string()
}

fn default_demo_count() -> usize {
    DEFAULT_DEMO_COUNT
}

fn default_parse_retries() -> usize {
    2
}

fn default_parallelism() -> usize {
    4
}

fn default_max_attempts() -> usize {
    3
}

fn default_base_delay_ms() -> u64 {
    200
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Ratings CSV files, merged in order.
    pub ratings: Vec<PathBuf>,
    /// Metrics to analyze, e.g. ["uniqueness", "creativity"].
    pub metrics: Vec<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSection {
    pub min: i32,
    pub max: i32,
}

impl Default for ScaleSection {
    fn default() -> Self {
        ScaleSection { min: 1, max: 6 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterSection {
    #[serde(default = "default_expert_a")]
    pub expert_a: String,
    #[serde(default = "default_expert_b")]
    pub expert_b: String,
    #[serde(default)]
    pub candidates: Vec<String>,
}

impl Default for RaterSection {
    fn default() -> Self {
        RaterSection {
            expert_a: default_expert_a(),
            expert_b: default_expert_b(),
            candidates: Vec::new(),
        }
    }
}

/// One analysis run: an id for directory naming and the seed that drives
/// the context split and judge sampling. Extra per-run ratings files (for
/// example that run's judge outputs) are merged on top of the base data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: u64,
    pub seed: u64,
    #[serde(default)]
    pub ratings: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_runs")]
    pub runs: Vec<RunSpec>,
    #[serde(default = "default_fraction_grid")]
    pub fractions: Vec<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            runs: default_runs(),
            fractions: default_fraction_grid(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    pub tolerance: f64,
    pub tost_margin: f64,
    pub alpha: f64,
    pub bonferroni_m: usize,
    pub printed_precision: Option<u32>,
}

impl Default for GateSection {
    fn default() -> Self {
        let config = GateConfig::default();
        GateSection {
            tolerance: config.tolerance,
            tost_margin: config.tost_margin,
            alpha: config.alpha,
            bonferroni_m: config.bonferroni_m,
            printed_precision: config.printed_precision,
        }
    }
}

impl GateSection {
    pub fn to_config(&self) -> GateConfig {
        GateConfig {
            tolerance: self.tolerance,
            tost_margin: self.tost_margin,
            alpha: self.alpha,
            bonferroni_m: self.bonferroni_m,
            printed_precision: self.printed_precision,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub pool_size: usize,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            pool_size: default_pool_size(),
            seed: default_split_seed(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeSection {
    /// One of no_context, text, text_image, text_image_reasoning.
    pub variant: String,
    pub model: String,
    /// Model used by the text_image_reasoning variant.
    pub reasoning_model: String,
    pub base_url: String,
    pub demo_count: usize,
    pub parse_retries: usize,
    pub strict_parse: bool,
    pub parallelism: usize,
    pub max_attempts: usize,
    pub base_delay_ms: u64,
    /// Directory of item images named `<item_id>.png` or `.jpg`.
    pub images_dir: Option<PathBuf>,
    /// Description store CSV (`item_id,description`).
    pub descriptions: Option<PathBuf>,
    /// When set, a scripted mock provider replaces the HTTP client.
    pub mock_script: Option<PathBuf>,
    pub cache_dir: PathBuf,
    /// Rater id recorded in the output CSV; defaults to `ai_<variant>`.
    pub rater_id: Option<String>,
}

impl Default for JudgeSection {
    fn default() -> Self {
        JudgeSection {
            variant: default_variant(),
            model: default_model(),
            reasoning_model: default_reasoning_model(),
            base_url: default_base_url(),
            demo_count: default_demo_count(),
            parse_retries: default_parse_retries(),
            strict_parse: false,
            parallelism: default_parallelism(),
            max_attempts: default_max_attempts(),
            base_delay_ms: default_base_delay_ms(),
            images_dir: None,
            descriptions: None,
            mock_script: None,
            cache_dir: default_cache_dir(),
            rater_id: None,
        }
    }
}

/// Full analysis configuration, read from one TOML file. Relative paths
/// are resolved against the config file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub data: DataSection,
    #[serde(default)]
    pub scale: ScaleSection,
    #[serde(default)]
    pub raters: RaterSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub gate: GateSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub judge: JudgeSection,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: AnalysisConfig = toml::from_str(&text)
            .map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        for rating_path in &mut config.data.ratings {
            *rating_path = resolve(&base, rating_path);
        }
        config.data.output_dir = resolve(&base, &config.data.output_dir);
        for run in &mut config.analysis.runs {
            for rating_path in &mut run.ratings {
                *rating_path = resolve(&base, rating_path);
            }
        }
        config.judge.cache_dir = resolve(&base, &config.judge.cache_dir);
        for optional in [
            &mut config.judge.images_dir,
            &mut config.judge.descriptions,
            &mut config.judge.mock_script,
        ] {
            if let Some(p) = optional {
                *p = resolve(&base, p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.data.ratings.is_empty() {
            return Err(ReportError::Config("data.ratings must list at least one file".into()));
        }
        if self.data.metrics.is_empty() {
            return Err(ReportError::Config("data.metrics must list at least one metric".into()));
        }
        if self.analysis.runs.is_empty() {
            return Err(ReportError::Config("analysis.runs must not be empty".into()));
        }
        let mut run_ids = BTreeSet::new();
        for run in &self.analysis.runs {
            if !run_ids.insert(run.id) {
                return Err(ReportError::Config(format!("duplicate run id {}", run.id)));
            }
        }
        if self.raters.expert_a == self.raters.expert_b {
            return Err(ReportError::Config(
                "raters.expert_a and raters.expert_b must differ".into(),
            ));
        }
        self.scale()?;
        self.gate.to_config().validate()?;
        JudgeVariant::parse(&self.judge.variant)?;
        Ok(())
    }

    pub fn scale(&self) -> Result<RatingScale, ReportError> {
        Ok(RatingScale::new(self.scale.min, self.scale.max)?)
    }

    pub fn expert_a(&self) -> RaterId {
        RaterId::new(&self.raters.expert_a)
    }

    pub fn expert_b(&self) -> RaterId {
        RaterId::new(&self.raters.expert_b)
    }

    pub fn candidates(&self) -> Vec<RaterId> {
        self.raters.candidates.iter().map(RaterId::new).collect()
    }

    pub fn metrics(&self, filter: Option<&str>) -> Result<Vec<Metric>, ReportError> {
        match filter {
            None => Ok(self.data.metrics.iter().map(Metric::new).collect()),
            Some(name) => {
                if self.data.metrics.iter().any(|m| m == name) {
                    Ok(vec![Metric::new(name)])
                } else {
                    Err(ReportError::Config(format!(
                        "metric {name:?} is not in data.metrics {:?}",
                        self.data.metrics
                    )))
                }
            }
        }
    }

    /// Base ratings merged from every configured file.
    pub fn load_base_matrix(&self) -> Result<RatingMatrix, ReportError> {
        let scale = self.scale()?;
        let mut matrix = RatingMatrix::new(scale);
        for path in &self.data.ratings {
            let loaded = with_context(
                || format!("loading ratings from {}", path.display()),
                load_ratings_path(path, scale).map_err(ReportError::from),
            )?;
            matrix.merge(&loaded)?;
        }
        Ok(matrix)
    }
}

// ---------------------------------------------------------------------------
// Pair statistics
// ---------------------------------------------------------------------------

/// Compute the full nine-statistic battery for one pair: the agreement
/// summary, TOST, Bonferroni-corrected Wilcoxon, and the Jaccard overlap
/// curve (side B, the reference rater, sets the thresholds).
pub fn compute_pair_stats(
    pair: &PairedRatings,
    config: &GateConfig,
    fractions: &[f64],
) -> Result<(PairStats, JaccardCurve), ReportError> {
    let agreement = AgreementSummary::compute(pair)?;
    let tost = tost_equivalence(pair, config.tost_margin, config.alpha)?;
    let wilcoxon = wilcoxon_signed_rank(pair)?;
    let wilcoxon_p_corrected = bonferroni(wilcoxon.p_value, config.bonferroni_m)?;
    let curve = jaccard_curve(pair, PairSide::B, fractions)?;
    let stats = PairStats {
        agreement,
        tost,
        wilcoxon_p_corrected,
        jaccard_auc: curve.auc,
    };
    Ok((stats, curve))
}

// ---------------------------------------------------------------------------
// Analyze
// ---------------------------------------------------------------------------

/// One candidate-vs-expert comparison with everything needed for tables
/// and plots.
#[derive(Debug, Clone)]
pub struct PairReport {
    pub expert: RaterId,
    pub candidate: RaterId,
    pub pair: PairedRatings,
    pub stats: PairStats,
    pub curve: JaccardCurve,
    pub gate: GateReport,
}

/// One (metric, run) analysis: the expert baseline plus every candidate
/// compared against each expert.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub run_id: u64,
    pub seed: u64,
    pub items_used: usize,
    pub baseline_pair: PairedRatings,
    pub baseline: PairStats,
    pub baseline_curve: JaccardCurve,
    pub candidates: Vec<PairReport>,
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub metric: Metric,
    pub runs: Vec<RunReport>,
    /// Tests-passed aggregates keyed by "candidate vs expert".
    pub aggregates: BTreeMap<String, RunAggregate>,
}

/// Everything `cmd_analyze` computed, before or after writing to disk.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub expert_a: RaterId,
    pub expert_b: RaterId,
    pub metrics: Vec<MetricReport>,
    pub output_dir: PathBuf,
    pub gate_config: GateConfig,
}

fn aggregate_key(candidate: &RaterId, expert: &RaterId) -> String {
    format!("{candidate} vs {expert}")
}

fn analyze_run(
    config: &AnalysisConfig,
    metric: &Metric,
    run: &RunSpec,
    gate_config: &GateConfig,
) -> Result<RunReport, ReportError> {
    let mut matrix = config.load_base_matrix()?;
    let scale = matrix.scale();
    for path in &run.ratings {
        let loaded = with_context(
            || format!("loading run {} ratings from {}", run.id, path.display()),
            load_ratings_path(path, scale).map_err(ReportError::from),
        )?;
        matrix.merge(&loaded)?;
    }
    let expert_a = config.expert_a();
    let expert_b = config.expert_b();
    let roster = matrix.raters();
    for expert in [&expert_a, &expert_b] {
        if !roster.contains(expert) {
            return Err(ReportError::Config(format!(
                "expert {expert} has no ratings in the loaded data"
            )));
        }
    }
    let mut raters = vec![expert_a.clone(), expert_b.clone()];
    raters.extend(config.candidates());
    let filtered = complete_case_filter(&matrix, &raters, metric)?;
    if filtered.retained < 2 {
        return Err(ReportError::Config(format!(
            "complete-case filtering left {} item(s); at least 2 are required",
            filtered.retained
        )));
    }
    let items: BTreeSet<ItemId> = filtered.matrix.items().cloned().collect();
    let fractions = &config.analysis.fractions;

    // Baseline: expert A in the candidate slot, expert B as reference, so
    // a candidate identical to expert A reproduces the baseline row in the
    // expert-B table exactly.
    let baseline_pair = paired_vector(&filtered.matrix, &expert_a, &expert_b, metric, &items)?;
    let (baseline, baseline_curve) = with_context(
        || format!("baseline {expert_a} vs {expert_b}"),
        compute_pair_stats(&baseline_pair, gate_config, fractions),
    )?;

    let mut candidates = Vec::new();
    for expert in [&expert_a, &expert_b] {
        for candidate in &config.candidates() {
            let pair = paired_vector(&filtered.matrix, candidate, expert, metric, &items)?;
            let (stats, curve) = with_context(
                || format!("candidate {candidate} vs {expert}"),
                compute_pair_stats(&pair, gate_config, fractions),
            )?;
            let gate = evaluate_gate_inputs(&stats.inputs(), &baseline.inputs(), gate_config)?;
            candidates.push(PairReport {
                expert: expert.clone(),
                candidate: candidate.clone(),
                pair,
                stats,
                curve,
                gate,
            });
        }
    }
    Ok(RunReport {
        run_id: run.id,
        seed: run.seed,
        items_used: filtered.retained,
        baseline_pair,
        baseline,
        baseline_curve,
        candidates,
    })
}

/// Run the full analysis for every configured metric and run, writing gate
/// tables, plot data, and the aggregate summary under the output
/// directory. Deterministic given config and inputs.
pub fn cmd_analyze(
    config: &AnalysisConfig,
    metric_filter: Option<&str>,
) -> Result<ReportBundle, ReportError> {
    let gate_config = config.gate.to_config();
    let mut metrics = Vec::new();
    for metric in config.metrics(metric_filter)? {
        let mut runs = Vec::new();
        for run in &config.analysis.runs {
            let report = with_context(
                || format!("metric {metric}, run {}", run.id),
                analyze_run(config, &metric, run, &gate_config),
            )?;
            runs.push(report);
        }
        let mut aggregates = BTreeMap::new();
        if let Some(first) = runs.first() {
            for pair_report in &first.candidates {
                let key = aggregate_key(&pair_report.candidate, &pair_report.expert);
                let reports: Vec<GateReport> = runs
                    .iter()
                    .flat_map(|r| &r.candidates)
                    .filter(|p| {
                        p.candidate == pair_report.candidate && p.expert == pair_report.expert
                    })
                    .map(|p| p.gate.clone())
                    .collect();
                aggregates.insert(key, aggregate_runs(&reports)?);
            }
        }
        metrics.push(MetricReport {
            metric,
            runs,
            aggregates,
        });
    }
    let bundle = ReportBundle {
        expert_a: config.expert_a(),
        expert_b: config.expert_b(),
        metrics,
        output_dir: config.data.output_dir.clone(),
        gate_config,
    };
    write_report_bundle(&bundle)?;
    emit_plot_data(&bundle)?;
    Ok(bundle)
}

fn run_dir(bundle: &ReportBundle, metric: &Metric, run: &RunReport) -> PathBuf {
    bundle
        .output_dir
        .join(metric.as_str())
        .join(format!("run_{}", run.run_id))
}

fn gate_rows_for_run(bundle: &ReportBundle, run: &RunReport) -> Vec<GateRow> {
    let mut rows = vec![GateRow {
        expert: bundle.expert_b.to_string(),
        candidate: bundle.expert_a.to_string(),
        inputs: run.baseline.inputs(),
        published_passed: None,
        is_baseline: true,
    }];
    for pair in &run.candidates {
        rows.push(GateRow {
            expert: pair.expert.to_string(),
            candidate: pair.candidate.to_string(),
            inputs: pair.stats.inputs(),
            published_passed: Some(pair.gate.passed),
            is_baseline: false,
        });
    }
    rows
}

fn mark(text: String, passed: bool) -> String {
    if passed {
        format!("{text}*")
    } else {
        text
    }
}

/// Markdown gate table. Pass markers (`*`) sit on the cell that carries
/// each criterion: kappa, icc, mae, bias, loa, tost, spearman, wilcoxon,
/// jaccard auc.
fn gate_table_markdown(bundle: &ReportBundle, metric: &Metric, run: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# {metric} run {} (n = {}, tolerance {}%, alpha {})\n\n",
        run.run_id,
        run.items_used,
        fmt_fixed(bundle.gate_config.tolerance * 100.0, 0),
        bundle.gate_config.alpha
    ));
    out.push_str("A `*` marks a criterion met relative to the expert baseline.\n\n");
    out.push_str(
        "| candidate | vs expert | kappa | icc | mae | bias | loa | tost | spearman | wilcoxon p | jaccard auc | passed |\n",
    );
    out.push_str(
        "|---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    let b = run.baseline.inputs();
    out.push_str(&format!(
        "| {} (baseline) | {} | {} | {} | {} | {} | {} | -- | {} | {} | {} | -- |\n",
        bundle.expert_a,
        bundle.expert_b,
        fmt_fixed(b.kappa, 2),
        fmt_fixed(b.icc, 2),
        fmt_fixed(b.mae, 2),
        fmt_fixed(b.bias, 2),
        fmt_fixed(b.sd_band, 2),
        fmt_fixed(b.spearman_rho, 2),
        fmt_scientific2(b.wilcoxon_p_corrected),
        fmt_fixed(b.jaccard_auc, 2),
    ));
    for pair in &run.candidates {
        let s = pair.stats.inputs();
        let f = pair.gate.flags;
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {}/9 |\n",
            pair.candidate,
            pair.expert,
            mark(fmt_fixed(s.kappa, 2), f.kappa),
            mark(fmt_fixed(s.icc, 2), f.icc),
            mark(fmt_fixed(s.mae, 2), f.mae),
            mark(fmt_fixed(s.bias, 2), f.ba_bias),
            mark(fmt_fixed(s.sd_band, 2), f.ba_loa),
            mark(if s.tost_equivalent { "True" } else { "False" }.to_string(), f.tost),
            mark(fmt_fixed(s.spearman_rho, 2), f.spearman),
            mark(fmt_scientific2(s.wilcoxon_p_corrected), f.wilcoxon),
            mark(fmt_fixed(s.jaccard_auc, 2), f.jaccard_auc),
            pair.gate.passed,
        ));
    }
    let warnings: BTreeSet<&str> = run
        .candidates
        .iter()
        .flat_map(|p| p.gate.warnings.iter().map(String::as_str))
        .collect();
    if !warnings.is_empty() {
        out.push('\n');
        for warning in warnings {
            out.push_str(&format!("- warning: {warning}\n"));
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct AggregateSummaryEntry {
    passed: Vec<u8>,
    mean_passed: f64,
}

#[derive(Debug, Serialize)]
struct MetricSummary {
    runs: Vec<u64>,
    items_used: Vec<usize>,
    aggregates: BTreeMap<String, AggregateSummaryEntry>,
}

/// Write gate tables (CSV + markdown) for every (metric, run) and the
/// cross-run aggregate summary JSON.
pub fn write_report_bundle(bundle: &ReportBundle) -> Result<(), ReportError> {
    let mut summary: BTreeMap<String, MetricSummary> = BTreeMap::new();
    for metric_report in &bundle.metrics {
        for run in &metric_report.runs {
            let dir = run_dir(bundle, &metric_report.metric, run);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let rows = gate_rows_for_run(bundle, run);
            write_gate_csv(&rows, &dir.join("gate_table.csv"))?;
            write_text(
                &dir.join("gate_table.md"),
                &gate_table_markdown(bundle, &metric_report.metric, run),
            )?;
        }
        summary.insert(
            metric_report.metric.to_string(),
            MetricSummary {
                runs: metric_report.runs.iter().map(|r| r.run_id).collect(),
                items_used: metric_report.runs.iter().map(|r| r.items_used).collect(),
                aggregates: metric_report
                    .aggregates
                    .iter()
                    .map(|(key, aggregate)| {
                        (
                            key.clone(),
                            AggregateSummaryEntry {
                                passed: aggregate.passed.clone(),
                                mean_passed: aggregate.mean_passed,
                            },
                        )
                    })
                    .collect(),
            },
        );
    }
    let path = bundle.output_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| ReportError::Config(format!("summary serialization: {e}")))?;
    write_text(&path, &format!("{text}\n"))
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

fn bland_altman_points_csv(pair: &PairedRatings) -> String {
    let mut out = String::from("item_id,mean_rating,difference\n");
    for (index, item) in pair.items.iter().enumerate() {
        let mean = (pair.a[index] + pair.b[index]) as f64 / 2.0;
        let difference = pair.b[index] - pair.a[index];
        out.push_str(&format!("{item},{},{difference}\n", fmt_fixed(mean, 1)));
    }
    out
}

fn bland_altman_lines_csv(stats: &PairStats) -> String {
    let ba = &stats.agreement.bland_altman;
    format!(
        "line,value\nbias,{}\nloa_low,{}\nloa_high,{}\n",
        fmt_fixed(ba.bias, 6),
        fmt_fixed(ba.loa_low, 6),
        fmt_fixed(ba.loa_high, 6)
    )
}

fn write_pair_plots(
    dir: &Path,
    label: &str,
    pair: &PairedRatings,
    stats: &PairStats,
    curve: &JaccardCurve,
) -> Result<(), ReportError> {
    write_text(&dir.join(format!("ba_{label}.csv")), &bland_altman_points_csv(pair))?;
    write_text(&dir.join(format!("ba_{label}_lines.csv")), &bland_altman_lines_csv(stats))?;
    write_curve_csv(curve, &dir.join(format!("jaccard_{label}.csv")))?;
    Ok(())
}

/// Write per-pair Bland-Altman point files (`item_id,mean_rating,difference`
/// plus a bias/limits sidecar) and Jaccard curve files for every pair in
/// the bundle, including the baseline.
pub fn emit_plot_data(bundle: &ReportBundle) -> Result<(), ReportError> {
    for metric_report in &bundle.metrics {
        for run in &metric_report.runs {
            let dir = run_dir(bundle, &metric_report.metric, run).join("plots");
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let baseline_label = format!("{}_vs_{}", bundle.expert_a, bundle.expert_b);
            write_pair_plots(
                &dir,
                &baseline_label,
                &run.baseline_pair,
                &run.baseline,
                &run.baseline_curve,
            )?;
            for pair in &run.candidates {
                let label = format!("{}_vs_{}", pair.candidate, pair.expert);
                write_pair_plots(&dir, &label, &pair.pair, &pair.stats, &pair.curve)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gate replay
// ---------------------------------------------------------------------------

/// One replayed row: the computed gate verdict next to the published count.
#[derive(Debug, Clone)]
pub struct ReplayRow {
    pub expert: String,
    pub candidate: String,
    pub inputs: crate::gate::GateInputs,
    pub gate: GateReport,
    pub published: Option<u8>,
}

impl ReplayRow {
    /// True when a published count exists and the computed count equals it.
    pub fn matches(&self) -> bool {
        self.published == Some(self.gate.passed)
    }
}

#[derive(Debug, Clone)]
pub struct ReplayTable {
    pub baseline: GateRow,
    pub rows: Vec<ReplayRow>,
    /// Rows that carried a published count.
    pub comparable: usize,
    /// Rows whose computed count equals the published count.
    pub matched: usize,
}

/// Re-evaluate a published statistics table: every candidate row is gated
/// against the table's baseline row and compared to its published
/// tests-passed count.
pub fn cmd_gate_replay(stats_csv: &Path, config: &GateConfig) -> Result<ReplayTable, ReportError> {
    let rows = load_gate_rows(stats_csv)?;
    let (baseline, candidates) = partition_baseline(rows)?;
    let mut replayed = Vec::with_capacity(candidates.len());
    for row in candidates {
        let gate = with_context(
            || format!("replaying {} vs {}", row.candidate, row.expert),
            evaluate_gate_inputs(&row.inputs, &baseline.inputs, config).map_err(ReportError::from),
        )?;
        replayed.push(ReplayRow {
            expert: row.expert,
            candidate: row.candidate,
            inputs: row.inputs,
            gate,
            published: row.published_passed,
        });
    }
    let comparable = replayed.iter().filter(|r| r.published.is_some()).count();
    let matched = replayed.iter().filter(|r| r.matches()).count();
    Ok(ReplayTable {
        baseline,
        rows: replayed,
        comparable,
        matched,
    })
}

/// Replay table as markdown: computed vs published counts with a match
/// column.
pub fn replay_markdown(table: &ReplayTable) -> String {
    let mut out = String::from(
        "| candidate | vs expert | computed | published | match |\n|---|---|---|---|---|\n",
    );
    for row in &table.rows {
        let published = match row.published {
            Some(count) => format!("{count}/9"),
            None => "--".to_string(),
        };
        let verdict = match row.published {
            Some(_) if row.matches() => "yes",
            Some(_) => "NO",
            None => "--",
        };
        out.push_str(&format!(
            "| {} | {} | {}/9 | {} | {} |\n",
            row.candidate, row.expert, row.gate.passed, published, verdict
        ));
    }
    out.push_str(&format!(
        "\nmatched {} of {} rows with published counts\n",
        table.matched, table.comparable
    ));
    out
}

/// Write the replayed table (CSV in the gate schema, with computed counts)
/// and the comparison markdown next to each other.
pub fn write_replay_outputs(
    table: &ReplayTable,
    out_dir: &Path,
    stem: &str,
) -> Result<(), ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut rows = vec![table.baseline.clone()];
    for row in &table.rows {
        rows.push(GateRow {
            expert: row.expert.clone(),
            candidate: row.candidate.clone(),
            inputs: row.inputs,
            published_passed: Some(row.gate.passed),
            is_baseline: false,
        });
    }
    write_gate_csv(&rows, &out_dir.join(format!("{stem}_replay.csv")))?;
    write_text(&out_dir.join(format!("{stem}_replay.md")), &replay_markdown(table))
}

// ---------------------------------------------------------------------------
// Ingest and split
// ---------------------------------------------------------------------------

/// Load, validate, merge, and re-emit the ratings data in canonical order.
/// Returns the normalized CSV path and the record count.
pub fn cmd_ingest(config: &AnalysisConfig) -> Result<(PathBuf, usize), ReportError> {
    let matrix = config.load_base_matrix()?;
    let path = config.data.output_dir.join("ratings_normalized.csv");
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_ratings_csv(&matrix, file)?;
    Ok((path, matrix.record_count()))
}

/// Reserve the context pool for a metric and write the split manifest.
pub fn cmd_split(
    config: &AnalysisConfig,
    metric_override: Option<&str>,
    seed_override: Option<u64>,
) -> Result<(PathBuf, DatasetSplit), ReportError> {
    let metric = config
        .metrics(metric_override)?
        .into_iter()
        .next()
        .expect("validated non-empty");
    let matrix = config.load_base_matrix()?;
    let seed = seed_override.unwrap_or(config.split.seed);
    let split = split_context_pool(
        &matrix,
        &config.expert_a(),
        &config.expert_b(),
        &metric,
        config.split.pool_size,
        seed,
    )?;
    let path = config.data.output_dir.join(format!("split_{metric}.csv"));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_split_manifest(&split, file)?;
    Ok((path, split))
}

// ---------------------------------------------------------------------------
// Judge
// ---------------------------------------------------------------------------

/// Where one judge run wrote its outputs, plus the in-memory outcome.
#[derive(Debug)]
pub struct JudgeRunOutput {
    pub rater: RaterId,
    pub ratings_path: PathBuf,
    pub failures_path: PathBuf,
    pub summary_path: PathBuf,
    pub outcome: JudgeOutcome,
}

fn load_or_compute_split(
    config: &AnalysisConfig,
    matrix: &RatingMatrix,
    metric: &Metric,
) -> Result<DatasetSplit, ReportError> {
    let manifest = config.data.output_dir.join(format!("split_{metric}.csv"));
    if manifest.is_file() {
        let file = fs::File::open(&manifest).map_err(io_err(&manifest))?;
        return Ok(load_split_manifest(file)?);
    }
    Ok(split_context_pool(
        matrix,
        &config.expert_a(),
        &config.expert_b(),
        metric,
        config.split.pool_size,
        config.split.seed,
    )?)
}

fn load_image_for(dir: Option<&Path>, item: &ItemId) -> Option<ImagePayload> {
    let dir = dir?;
    for extension in ["png", "jpg", "jpeg"] {
        let path = dir.join(format!("{item}.{extension}"));
        if path.is_file() {
            if let Ok(payload) = ImagePayload::load(&path, image::DEFAULT_MAX_LONG_EDGE) {
                return Some(payload);
            }
        }
    }
    None
}

#[derive(Debug, Serialize)]
struct JudgeRunSummary {
    variant: String,
    model: String,
    metric: String,
    run_seed: u64,
    rater: String,
    demo_count: usize,
    targets: usize,
    rated: usize,
    failed: usize,
}

/// Rate the test set with one judge variant and write the ratings CSV,
/// failure manifest, and run summary. The summary deliberately omits call
/// counts so warm and cold runs emit byte-identical files.
pub fn cmd_judge(
    config: &AnalysisConfig,
    metric_override: Option<&str>,
    seed_override: Option<u64>,
    variant_override: Option<&str>,
) -> Result<JudgeRunOutput, ReportError> {
    let metric = config
        .metrics(metric_override)?
        .into_iter()
        .next()
        .expect("validated non-empty");
    let variant = JudgeVariant::parse(variant_override.unwrap_or(&config.judge.variant))?;
    let model_name = if variant.uses_reasoning() {
        config.judge.reasoning_model.clone()
    } else {
        config.judge.model.clone()
    };
    let scale = config.scale()?;
    let matrix = config.load_base_matrix()?;
    let split = load_or_compute_split(config, &matrix, &metric)?;
    let run_seed = seed_override.unwrap_or_else(|| {
        config.analysis.runs.first().map(|r| r.seed).unwrap_or(1)
    });

    let descriptions = match &config.judge.descriptions {
        Some(path) => DescriptionStore::load(path)?,
        None => DescriptionStore::new(),
    };
    let demos = if variant.uses_demos() {
        let expert_a = config.expert_a();
        let mut agreed: BTreeMap<ItemId, i32> = BTreeMap::new();
        for item in &split.context_pool {
            match matrix.get(item, &expert_a, &metric) {
                Some(rating) => {
                    agreed.insert(item.clone(), rating);
                }
                None => {
                    return Err(ReportError::Config(format!(
                        "context item {item} has no {expert_a} rating on {metric}"
                    )))
                }
            }
        }
        select_context(&agreed, &descriptions, &scale, config.judge.demo_count, run_seed)?
    } else {
        Vec::new()
    };

    let images_dir = config.judge.images_dir.as_deref();
    let targets: Vec<QueryTarget> = split
        .test_set
        .iter()
        .map(|item| QueryTarget {
            item: item.clone(),
            description: descriptions.get(item).map(str::to_string),
            image: if variant.needs_image() {
                load_image_for(images_dir, item)
            } else {
                None
            },
        })
        .collect();

    let setup = JudgeSetup {
        variant,
        model_name: model_name.clone(),
    };
    let job = JudgeJob {
        setup,
        metric: metric.clone(),
        scale,
        run_seed,
        demos,
        prompt: PromptTemplates::default().render(&metric, &scale),
        parse_retries: config.judge.parse_retries,
        strict_parse: config.judge.strict_parse,
        parallelism: config.judge.parallelism,
    };
    let retry = RetryPolicy {
        max_attempts: config.judge.max_attempts,
        base_delay: std::time::Duration::from_millis(config.judge.base_delay_ms),
    };
    let cache = ResponseCache::new(&config.judge.cache_dir);
    let mock;
    let http;
    let client: &dyn ModelClient = match &config.judge.mock_script {
        Some(script) => {
            mock = MockModelClient::from_script_csv(script).map_err(JudgeError::from)?;
            &mock
        }
        None => {
            http = HttpModelClient::from_env(config.judge.base_url.clone())
                .map_err(JudgeError::from)?;
            &http
        }
    };
    let outcome = run_judge(&job, &targets, client, &cache, &retry)?;

    let rater = RaterId::new(
        config
            .judge
            .rater_id
            .clone()
            .unwrap_or_else(|| format!("ai_{}", variant.name())),
    );
    let dir = config
        .data
        .output_dir
        .join("judge")
        .join(variant.name())
        .join(metric.as_str())
        .join(format!("run_{run_seed}"));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let ratings_path = dir.join("ratings.csv");
    let mut judged = RatingMatrix::new(scale);
    for (item, rating) in &outcome.ratings {
        judged.insert(RatingRecord {
            item: item.clone(),
            rater: rater.clone(),
            metric: metric.clone(),
            rating: *rating,
        })?;
    }
    let file = fs::File::create(&ratings_path).map_err(io_err(&ratings_path))?;
    write_ratings_csv(&judged, file)?;

    let failures_path = dir.join("failures.json");
    let failures_text = serde_json::to_string_pretty(&outcome.failures)
        .map_err(|e| ReportError::Config(format!("failure manifest serialization: {e}")))?;
    write_text(&failures_path, &format!("{failures_text}\n"))?;

    let summary_path = dir.join("summary.json");
    let summary = JudgeRunSummary {
        variant: variant.name().to_string(),
        model: model_name,
        metric: metric.to_string(),
        run_seed,
        rater: rater.to_string(),
        demo_count: job.demos.len(),
        targets: targets.len(),
        rated: outcome.ratings.len(),
        failed: outcome.failures.len(),
    };
    let summary_text = serde_json::to_string_pretty(&summary)
        .map_err(|e| ReportError::Config(format!("summary serialization: {e}")))?;
    write_text(&summary_path, &format!("{summary_text}\n"))?;

    Ok(JudgeRunOutput {
        rater,
        ratings_path,
        failures_path,
        summary_path,
        outcome,
    })
}
