//! Few-shot prompting harness for vision-language judges.
//!
//! Four judge variants rate design sketches on an integer scale. The
//! no-context variant sees only the target image; the others learn from
//! demonstrations (description + agreed expert rating) drawn from a held
//! -out context pool, and differ in whether the query carries text, an
//! image, or both, with the reasoning variant routed to a different model.
//! Every response is cached on disk keyed by a prompt content hash, so
//! reruns are free and prompt drift is detectable.

pub mod cache;
pub mod client;
pub mod descriptions;
pub mod image;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ratings::{ItemId, Metric, RatingScale};
use cache::{CachedResponse, ResponseCache};
use client::{complete_with_retry, ChatMessage, ChatRequest, ClientError, ContentPart, ModelClient, RetryPolicy};
use descriptions::DescriptionStore;
use image::ImagePayload;

/// Demonstrations per prompt, constant across variants and runs.
pub const DEFAULT_DEMO_COUNT: usize = 9;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("variant {variant} missing required modality: {}", missing.join(", "))]
    Modality { variant: String, missing: Vec<String> },
    #[error("variant {variant} does not take {unexpected}")]
    UnexpectedInput { variant: String, unexpected: String },
    #[error("context pool has no agreed item with rating {rating}")]
    Coverage { rating: i32 },
    #[error("no in-scale integer rating in response: {raw:?}")]
    Parse { raw: String },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("description store: {0}")]
    Store(String),
    #[error("response cache: {0}")]
    Cache(String),
    #[error("image: {0}")]
    Image(String),
    #[error("{0}")]
    Parameter(String),
}

/// The four judge flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum JudgeVariant {
    /// Target image only; no demonstrations, no description.
    NoContext,
    /// Demonstrations plus the target's description; no image.
    Text,
    /// Demonstrations plus the target's description and image.
    TextImage,
    /// Same prompt as [`JudgeVariant::TextImage`], routed to a reasoning
    /// model.
    TextImageReasoning,
}

impl JudgeVariant {
    pub const ALL: [JudgeVariant; 4] = [
        JudgeVariant::NoContext,
        JudgeVariant::Text,
        JudgeVariant::TextImage,
        JudgeVariant::TextImageReasoning,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            JudgeVariant::NoContext => "no_context",
            JudgeVariant::Text => "text",
            JudgeVariant::TextImage => "text_image",
            JudgeVariant::TextImageReasoning => "text_image_reasoning",
        }
    }

    pub fn uses_demos(&self) -> bool {
        !matches!(self, JudgeVariant::NoContext)
    }

    pub fn needs_image(&self) -> bool {
        !matches!(self, JudgeVariant::Text)
    }

    pub fn needs_description(&self) -> bool {
        !matches!(self, JudgeVariant::NoContext)
    }

    pub fn uses_reasoning(&self) -> bool {
        matches!(self, JudgeVariant::TextImageReasoning)
    }

    pub fn parse(name: &str) -> Result<Self, JudgeError> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "no_context" | "nocontext" => Ok(JudgeVariant::NoContext),
            "text" => Ok(JudgeVariant::Text),
            "text_image" | "textimage" => Ok(JudgeVariant::TextImage),
            "text_image_reasoning" | "textimagereasoning" => {
                Ok(JudgeVariant::TextImageReasoning)
            }
            other => Err(JudgeError::Parameter(format!(
                "unknown judge variant {other:?} (no_context, text, text_image, text_image_reasoning)"
            ))),
        }
    }
}

impl std::fmt::Display for JudgeVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A judge variant bound to the provider model that realizes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JudgeSetup {
    pub variant: JudgeVariant,
    pub model_name: String,
}

/// One in-context example: a described design with the experts' agreed
/// rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Demonstration {
    pub item: ItemId,
    pub description: String,
    pub rating: i32,
}

/// The design being judged, with whatever modalities exist for it.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTarget {
    pub item: ItemId,
    pub description: Option<String>,
    pub image: Option<ImagePayload>,
}

/// Prompt template set. `{metric}`, `{min}`, and `{max}` placeholders are
/// substituted when rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplates {
    pub task_framing: String,
    pub metric_definition: String,
    pub scale_instruction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            task_framing: "You are rating early-stage design sketches from a design study. \
Each design was sketched by a participant in response to the same design brief, and each \
carries a short handwritten description."
                .to_string(),
            metric_definition: "Rate the {metric} of the target design on an integer scale \
from {min} (lowest) to {max} (highest), judging it the way an experienced design evaluator \
would."
                .to_string(),
            scale_instruction: "Respond with a single integer between {min} and {max}. Do \
not explain your rating."
                .to_string(),
        }
    }
}

fn substitute(template: &str, metric: &Metric, scale: &RatingScale) -> String {
    template
        .replace("{metric}", metric.as_ref())
        .replace("{min}", &scale.min.to_string())
        .replace("{max}", &scale.max.to_string())
}

impl PromptTemplates {
    /// Substitute placeholders for a concrete metric and scale.
    pub fn render(&self, metric: &Metric, scale: &RatingScale) -> PromptText {
        PromptText {
            task_framing: substitute(&self.task_framing, metric, scale),
            metric_definition: substitute(&self.metric_definition, metric, scale),
            scale_instruction: substitute(&self.scale_instruction, metric, scale),
        }
    }
}

/// Rendered prompt components, ready for assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptText {
    pub task_framing: String,
    pub metric_definition: String,
    pub scale_instruction: String,
}

/// A fully assembled prompt for one target item.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub variant: JudgeVariant,
    pub model_name: String,
    pub task_framing: String,
    pub metric_definition: String,
    pub scale_instruction: String,
    pub demonstrations: Vec<Demonstration>,
    pub query_item: ItemId,
    pub query_description: Option<String>,
    pub query_image: Option<ImagePayload>,
    pub scale: RatingScale,
}

fn feed(hasher: &mut Sha256, tag: &str, value: &[u8]) {
    hasher.update(tag.as_bytes());
    hasher.update((value.len() as u64).to_le_bytes());
    hasher.update(value);
}

impl PromptBundle {
    /// Hex SHA-256 over every field that shapes the provider request:
    /// variant, model, prompt texts, scale, demonstrations in order, query
    /// description, and the image bytes' digest. Identical inputs hash
    /// identically across processes and platforms.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        feed(&mut hasher, "variant", self.variant.name().as_bytes());
        feed(&mut hasher, "model", self.model_name.as_bytes());
        feed(&mut hasher, "task", self.task_framing.as_bytes());
        feed(&mut hasher, "metric", self.metric_definition.as_bytes());
        feed(&mut hasher, "scale_text", self.scale_instruction.as_bytes());
        feed(&mut hasher, "scale_min", &self.scale.min.to_le_bytes());
        feed(&mut hasher, "scale_max", &self.scale.max.to_le_bytes());
        feed(
            &mut hasher,
            "demo_count",
            &(self.demonstrations.len() as u64).to_le_bytes(),
        );
        for demo in &self.demonstrations {
            feed(&mut hasher, "demo_item", demo.item.as_ref().as_bytes());
            feed(&mut hasher, "demo_text", demo.description.as_bytes());
            feed(&mut hasher, "demo_rating", &demo.rating.to_le_bytes());
        }
        match &self.query_description {
            Some(text) => feed(&mut hasher, "query_text", text.as_bytes()),
            None => feed(&mut hasher, "query_text_absent", &[]),
        }
        match &self.query_image {
            Some(image) => feed(&mut hasher, "query_image", image.digest_hex().as_bytes()),
            None => feed(&mut hasher, "query_image_absent", &[]),
        }
        hex::encode(hasher.finalize())
    }

    /// Assemble the provider request: framing, metric definition,
    /// demonstrations in list order, the query, and the answer-format
    /// instruction last.
    pub fn to_request(&self) -> ChatRequest {
        let mut parts = vec![
            ContentPart::text(&self.task_framing),
            ContentPart::text(&self.metric_definition),
        ];
        if !self.demonstrations.is_empty() {
            parts.push(ContentPart::text(
                "Here are example designs with their expert ratings:",
            ));
            for (index, demo) in self.demonstrations.iter().enumerate() {
                parts.push(ContentPart::text(format!(
                    "Example {}\nDescription: {}\nRating: {}",
                    index + 1,
                    demo.description,
                    demo.rating
                )));
            }
        }
        parts.push(ContentPart::text("Now rate the target design."));
        if let Some(description) = &self.query_description {
            parts.push(ContentPart::text(format!("Description: {description}")));
        }
        if let Some(image) = &self.query_image {
            parts.push(ContentPart::image(image.data_url()));
        }
        parts.push(ContentPart::text(&self.scale_instruction));
        ChatRequest {
            model: self.model_name.clone(),
            messages: vec![ChatMessage::user(parts)],
            tag: Some(self.query_item.as_ref().to_string()),
        }
    }
}

/// Assemble a prompt bundle, enforcing the variant's modality constraints:
/// the no-context variant takes an image and nothing else; the text variant
/// takes demonstrations and a description but no image; both image variants
/// take demonstrations, a description, and an image.
pub fn build_prompt(
    setup: &JudgeSetup,
    demos: &[Demonstration],
    target: &QueryTarget,
    prompt: &PromptText,
    scale: &RatingScale,
) -> Result<PromptBundle, JudgeError> {
    let variant = setup.variant;
    if variant.uses_demos() {
        if demos.is_empty() {
            return Err(JudgeError::Modality {
                variant: variant.name().to_string(),
                missing: vec!["demonstrations".to_string()],
            });
        }
    } else if !demos.is_empty() {
        return Err(JudgeError::UnexpectedInput {
            variant: variant.name().to_string(),
            unexpected: "demonstrations".to_string(),
        });
    }
    let mut missing = Vec::new();
    let description_present = target
        .description
        .as_deref()
        .map(|d| !d.trim().is_empty())
        .unwrap_or(false);
    if variant.needs_description() && !description_present {
        missing.push("description".to_string());
    }
    if variant.needs_image() && target.image.is_none() {
        missing.push("image".to_string());
    }
    if !missing.is_empty() {
        return Err(JudgeError::Modality {
            variant: variant.name().to_string(),
            missing,
        });
    }
    Ok(PromptBundle {
        variant,
        model_name: setup.model_name.clone(),
        task_framing: prompt.task_framing.clone(),
        metric_definition: prompt.metric_definition.clone(),
        scale_instruction: prompt.scale_instruction.clone(),
        demonstrations: demos.to_vec(),
        query_item: target.item.clone(),
        query_description: if variant.needs_description() {
            target.description.clone()
        } else {
            None
        },
        query_image: if variant.needs_image() {
            target.image.clone()
        } else {
            None
        },
        scale: *scale,
    })
}

/// Extract the final standalone in-scale integer from a response. A token
/// is standalone when it is not glued to letters, digits, underscores, or
/// a decimal fraction on either side; "Rating: 5" yields 5, while the 4 in
/// "4.5" or "v4" does not count.
pub fn parse_rating(raw: &str, scale: &RatingScale) -> Result<i32, JudgeError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut best: Option<i32> = None;
    let mut index = 0;
    while index < chars.len() {
        if !chars[index].is_ascii_digit() {
            index += 1;
            continue;
        }
        let mut start = index;
        let mut end = index;
        while end < chars.len() && chars[end].is_ascii_digit() {
            end += 1;
        }
        // Optional leading minus, itself not glued to a preceding word.
        let mut negative = false;
        if start > 0 && chars[start - 1] == '-' {
            let before_minus = if start >= 2 { Some(chars[start - 2]) } else { None };
            if !matches!(before_minus, Some(c) if c.is_alphanumeric() || c == '_') {
                negative = true;
                start -= 1;
            }
        }
        let prev = if start > 0 { Some(chars[start - 1]) } else { None };
        let next = chars.get(end).copied();
        let glued_prev = match prev {
            Some(c) if c.is_alphanumeric() || c == '_' => true,
            Some('.') => start >= 2 && chars[start - 2].is_ascii_digit(),
            _ => false,
        };
        let glued_next = match next {
            Some(c) if c.is_alphanumeric() || c == '_' => true,
            Some('.') => chars.get(end + 1).is_some_and(|c| c.is_ascii_digit()),
            _ => false,
        };
        if !glued_prev && !glued_next {
            let digits: String = chars[if negative { start + 1 } else { start }..end]
                .iter()
                .collect();
            if let Ok(mut value) = digits.parse::<i64>() {
                if negative {
                    value = -value;
                }
                if let Ok(value) = i32::try_from(value) {
                    if scale.contains(value) {
                        best = Some(value);
                    }
                }
            }
        }
        index = end;
    }
    best.ok_or_else(|| JudgeError::Parse {
        raw: raw.to_string(),
    })
}

/// Strict parse: the whole trimmed response must be one in-scale integer.
pub fn parse_rating_strict(raw: &str, scale: &RatingScale) -> Result<i32, JudgeError> {
    let trimmed = raw.trim();
    let value = trimmed.parse::<i32>().map_err(|_| JudgeError::Parse {
        raw: raw.to_string(),
    })?;
    if scale.contains(value) {
        Ok(value)
    } else {
        Err(JudgeError::Parse {
            raw: raw.to_string(),
        })
    }
}

/// Select `demo_count` demonstrations from the agreed context pool,
/// deterministically for a given seed: every scale value is covered at
/// least once, the remaining slots are spread as evenly as the pool allows
/// across values, item choice within a value is seeded sampling, and the
/// final list order is a seeded shuffle. Items without a stored non-empty
/// description cannot serve as demonstrations.
pub fn select_context(
    agreed: &BTreeMap<ItemId, i32>,
    descriptions: &DescriptionStore,
    scale: &RatingScale,
    demo_count: usize,
    seed: u64,
) -> Result<Vec<Demonstration>, JudgeError> {
    let scale_len = scale.len();
    if demo_count < scale_len {
        return Err(JudgeError::Parameter(format!(
            "demo_count {demo_count} is below the scale size {scale_len}; every rating \
value must appear at least once"
        )));
    }
    let mut by_value: BTreeMap<i32, Vec<&ItemId>> =
        scale.values().map(|v| (v, Vec::new())).collect();
    for (item, rating) in agreed {
        if !scale.contains(*rating) {
            return Err(JudgeError::Parameter(format!(
                "agreed rating {rating} for item {item} is outside the scale {scale}"
            )));
        }
        let described = descriptions
            .get(item)
            .map(|d| !d.trim().is_empty())
            .unwrap_or(false);
        if described {
            by_value.get_mut(rating).expect("scale value").push(item);
        }
    }
    for value in scale.values() {
        if by_value[&value].is_empty() {
            return Err(JudgeError::Coverage { rating: value });
        }
    }
    let capacity: usize = by_value.values().map(Vec::len).sum();
    if demo_count > capacity {
        return Err(JudgeError::Parameter(format!(
            "demo_count {demo_count} exceeds the {capacity} described agreed items available"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extra_order: Vec<i32> = scale.values().collect();
    extra_order.shuffle(&mut rng);
    let mut quotas: BTreeMap<i32, usize> = scale.values().map(|v| (v, 1)).collect();
    let mut remaining = demo_count - scale_len;
    while remaining > 0 {
        let mut progressed = false;
        for value in &extra_order {
            if remaining == 0 {
                break;
            }
            if quotas[value] < by_value[value].len() {
                *quotas.get_mut(value).expect("scale value") += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        debug_assert!(progressed, "capacity checked above");
        if !progressed {
            break;
        }
    }

    let mut demos = Vec::with_capacity(demo_count);
    for (value, items) in &by_value {
        let quota = quotas[value];
        let chosen = rand::seq::index::sample(&mut rng, items.len(), quota);
        for index in chosen.iter() {
            let item = items[index];
            demos.push(Demonstration {
                item: item.clone(),
                description: descriptions
                    .get(item)
                    .expect("filtered to described items")
                    .to_string(),
                rating: *value,
            });
        }
    }
    demos.shuffle(&mut rng);
    Ok(demos)
}

/// Everything fixed across the items of one judge run.
#[derive(Debug, Clone)]
pub struct JudgeJob {
    pub setup: JudgeSetup,
    pub metric: Metric,
    pub scale: RatingScale,
    pub run_seed: u64,
    pub demos: Vec<Demonstration>,
    pub prompt: PromptText,
    /// Extra prompt re-requests allowed when a response fails to parse.
    pub parse_retries: usize,
    pub strict_parse: bool,
    /// Worker threads for distinct items; 1 = sequential.
    pub parallelism: usize,
}

/// An item the judge could not rate, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JudgeFailure {
    pub item: ItemId,
    pub attempts: usize,
    pub reason: String,
}

/// The judge run's results: one rating per succeeded item, a failure
/// manifest for the rest, and call accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeOutcome {
    pub ratings: BTreeMap<ItemId, i32>,
    pub failures: Vec<JudgeFailure>,
    pub client_calls: usize,
    pub cache_hits: usize,
}

struct ItemResult {
    item: ItemId,
    rating: Option<i32>,
    failure: Option<JudgeFailure>,
}

fn judge_one(
    job: &JudgeJob,
    target: &QueryTarget,
    client: &dyn ModelClient,
    cache: &ResponseCache,
    retry: &RetryPolicy,
    client_calls: &AtomicUsize,
    cache_hits: &AtomicUsize,
) -> ItemResult {
    let fail = |attempts: usize, reason: String| ItemResult {
        item: target.item.clone(),
        rating: None,
        failure: Some(JudgeFailure {
            item: target.item.clone(),
            attempts,
            reason,
        }),
    };
    let bundle = match build_prompt(&job.setup, &job.demos, target, &job.prompt, &job.scale) {
        Ok(bundle) => bundle,
        Err(error) => return fail(0, error.to_string()),
    };
    let hash = bundle.content_hash();
    if let Some(record) = cache.get(
        job.setup.variant.name(),
        &job.metric,
        job.run_seed,
        &target.item,
        &hash,
        &job.setup.model_name,
        &job.scale,
    ) {
        cache_hits.fetch_add(1, Ordering::SeqCst);
        return ItemResult {
            item: target.item.clone(),
            rating: record.parsed_rating,
            failure: None,
        };
    }
    let request = bundle.to_request();
    let mut last_reason = String::new();
    for attempt in 1..=job.parse_retries + 1 {
        let (raw, _) = match complete_with_retry(client, &request, retry) {
            Ok(reply) => {
                client_calls.fetch_add(1, Ordering::SeqCst);
                reply
            }
            Err(error) => {
                client_calls.fetch_add(1, Ordering::SeqCst);
                return fail(attempt, format!("transport exhausted: {error}"));
            }
        };
        let parsed = if job.strict_parse {
            parse_rating_strict(&raw, &job.scale)
        } else {
            parse_rating(&raw, &job.scale)
        };
        let record = CachedResponse::new(
            job.setup.variant.name(),
            &job.setup.model_name,
            &target.item,
            job.run_seed,
            &hash,
            &raw,
            parsed.as_ref().ok().copied(),
        );
        if let Err(error) = cache.put(&job.metric, &record) {
            return fail(attempt, format!("cache write failed: {error}"));
        }
        match parsed {
            Ok(rating) => {
                return ItemResult {
                    item: target.item.clone(),
                    rating: Some(rating),
                    failure: None,
                }
            }
            Err(error) => last_reason = error.to_string(),
        }
    }
    fail(job.parse_retries + 1, last_reason)
}

/// Judge every target item: cache first, then the model, re-requesting on
/// parse failures up to the job's retry budget. Items that still fail land
/// in the failure manifest; they are never silently filled.
pub fn run_judge(
    job: &JudgeJob,
    targets: &[QueryTarget],
    client: &dyn ModelClient,
    cache: &ResponseCache,
    retry: &RetryPolicy,
) -> Result<JudgeOutcome, JudgeError> {
    if job.parallelism == 0 {
        return Err(JudgeError::Parameter("parallelism must be >= 1".into()));
    }
    let demo_items: std::collections::BTreeSet<&ItemId> =
        job.demos.iter().map(|d| &d.item).collect();
    for target in targets {
        if demo_items.contains(&target.item) {
            return Err(JudgeError::Parameter(format!(
                "item {} appears in both the demonstrations and the test set",
                target.item
            )));
        }
    }

    let client_calls = AtomicUsize::new(0);
    let cache_hits = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<ItemResult>> = Mutex::new(Vec::with_capacity(targets.len()));
    let workers = job.parallelism.min(targets.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= targets.len() {
                    break;
                }
                let result = judge_one(
                    job,
                    &targets[index],
                    client,
                    cache,
                    retry,
                    &client_calls,
                    &cache_hits,
                );
                results.lock().expect("results lock").push(result);
            });
        }
    });

    let mut ratings = BTreeMap::new();
    let mut failures = Vec::new();
    for result in results.into_inner().expect("results lock") {
        if let Some(rating) = result.rating {
            ratings.insert(result.item, rating);
        } else if let Some(failure) = result.failure {
            failures.push(failure);
        }
    }
    failures.sort_by(|a, b| a.item.cmp(&b.item));
    Ok(JudgeOutcome {
        ratings,
        failures,
        client_calls: client_calls.into_inner(),
        cache_hits: cache_hits.into_inner(),
    })
}
