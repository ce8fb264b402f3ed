//! On-disk response cache: one JSON record per judged item.
//!
//! Layout is `cache/<variant>/<metric>/<run_seed>/<item_id>.json`. Records
//! embed the prompt content hash and model name, so any change to the
//! prompt, demonstrations, image bytes, or model invalidates the entry.
//! Writes go through a temp file and an atomic rename, which keeps the
//! store safe under concurrent writers for distinct keys and gives
//! read-your-write per key.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::ratings::{ItemId, Metric, RatingScale};

/// A cached provider response together with everything needed to decide
/// whether it is still valid for a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub variant: String,
    pub model_name: String,
    pub item_id: String,
    pub run_seed: u64,
    pub content_hash: String,
    pub raw_text: String,
    pub parsed_rating: Option<i32>,
    /// Seconds since the Unix epoch at write time; informational only.
    pub timestamp: u64,
}

impl CachedResponse {
    pub fn new(
        variant: &str,
        model_name: &str,
        item_id: &ItemId,
        run_seed: u64,
        content_hash: &str,
        raw_text: &str,
        parsed_rating: Option<i32>,
    ) -> Self {
        CachedResponse {
            variant: variant.to_string(),
            model_name: model_name.to_string(),
            item_id: item_id.as_ref().to_string(),
            run_seed,
            content_hash: content_hash.to_string(),
            raw_text: raw_text.to_string(),
            parsed_rating,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Directory-backed response store.
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, variant: &str, metric: &Metric, run_seed: u64, item: &ItemId) -> PathBuf {
        self.root
            .join(variant)
            .join(metric.as_ref())
            .join(run_seed.to_string())
            .join(format!("{}.json", item.as_ref()))
    }

    /// Fetch a usable cached response: the record must exist, parse, match
    /// the current content hash and model, and carry a parsed rating inside
    /// the scale. Anything else is a miss.
    pub fn get(
        &self,
        variant: &str,
        metric: &Metric,
        run_seed: u64,
        item: &ItemId,
        content_hash: &str,
        model_name: &str,
        scale: &RatingScale,
    ) -> Option<CachedResponse> {
        let path = self.entry_path(variant, metric, run_seed, item);
        let text = std::fs::read_to_string(path).ok()?;
        let record: CachedResponse = serde_json::from_str(&text).ok()?;
        let rating = record.parsed_rating?;
        if record.content_hash == content_hash
            && record.model_name == model_name
            && record.item_id == item.as_ref()
            && record.run_seed == run_seed
            && scale.contains(rating)
        {
            Some(record)
        } else {
            None
        }
    }

    /// Persist a record atomically (temp file + rename).
    pub fn put(
        &self,
        metric: &Metric,
        record: &CachedResponse,
    ) -> Result<(), std::io::Error> {
        let item = ItemId::from(record.item_id.as_str());
        let path = self.entry_path(&record.variant, metric, record.run_seed, &item);
        let dir = path.parent().expect("entry path always has a parent");
        std::fs::create_dir_all(dir)?;
        let mut temp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut temp, record)?;
        temp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}
