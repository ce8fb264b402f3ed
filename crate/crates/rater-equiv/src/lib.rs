//! Agreement statistics, equivalence gating, and a model-judge harness for
//! ordinal rating studies.
//!
//! The crate answers one question about a panel of raters scoring the same
//! items on a small integer scale: is a candidate rater (a human novice or a
//! model acting as judge) interchangeable with an expert? It provides:
//!
//! - [`ratings`]: the rating-matrix data model, CSV ingestion, complete-case
//!   filtering, and seeded context/test splitting.
//! - [`agreement`]: pairwise agreement statistics: quadratic-weighted kappa,
//!   ICC(2,1), MAE, Spearman rho, and Bland-Altman bias/limits.
//! - [`hypothesis`]: Friedman and Wilcoxon signed-rank tests, Bonferroni
//!   correction, and paired TOST equivalence.
//! - [`topset`]: tie-inclusive top-set construction, Jaccard overlap curves,
//!   and their normalized area under the curve.
//! - [`gate`]: the nine-criterion equivalence gate comparing a candidate
//!   rater against an expert-expert baseline, plus run aggregation.
//! - [`judge`]: a few-shot prompting harness for vision-language judges with
//!   demonstration selection, response caching, and retries.
//! - [`report`]: configuration, orchestration, and deterministic table/plot
//!   emission backing the `rater-equiv` command-line tool.

pub mod agreement;
pub mod gate;
pub mod hypothesis;
pub mod judge;
mod numfmt;
mod rank;
pub mod ratings;
pub mod report;
pub mod topset;

pub use agreement::{AgreementSummary, BlandAltmanResult};
pub use gate::{GateConfig, GateInputs, GateReport, PairStats, RunAggregate};
pub use hypothesis::{TestResult, TostResult};
pub use ratings::{
    DatasetSplit, ItemId, Metric, PairedRatings, RaterId, RatingMatrix, RatingRecord, RatingScale,
};
pub use topset::{JaccardCurve, TopSet};

/// Doc-tested guide chapters; the book sources are the single source of truth
/// for every snippet they contain.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/agreement.md")]
    mod agreement {}
    #[doc = include_str!("../../../book/src/hypothesis.md")]
    mod hypothesis {}
    #[doc = include_str!("../../../book/src/topset.md")]
    mod topset {}
    #[doc = include_str!("../../../book/src/gate.md")]
    mod gate {}
    #[doc = include_str!("../../../book/src/judge.md")]
    mod judge {}
}
