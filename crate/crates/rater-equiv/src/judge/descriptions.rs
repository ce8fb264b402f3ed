//! Persistent store of extracted sketch descriptions.
//!
//! Transcribing the handwritten text on a sketch costs a model call, so it
//! happens once per item: results land in a CSV store and later runs read
//! from it. Empty transcriptions are stored too (the item then carries a
//! flagged empty description and remains usable only where no description
//! is required).

use std::collections::BTreeMap;
use std::path::Path;

use crate::judge::client::{complete_with_retry, ChatMessage, ChatRequest, ContentPart, ModelClient, RetryPolicy};
use crate::judge::image::ImagePayload;
use crate::judge::JudgeError;
use crate::ratings::ItemId;

pub const DESCRIPTION_CSV_HEADER: &str = "item_id,description";

/// In-memory map of item descriptions with CSV persistence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DescriptionStore {
    entries: BTreeMap<ItemId, String>,
}

impl DescriptionStore {
    pub fn new() -> Self {
        DescriptionStore::default()
    }

    /// Load a store from CSV with header `item_id,description`.
    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| JudgeError::Store(format!("{}: {e}", path.display())))?;
        let header = reader
            .headers()
            .map_err(|e| JudgeError::Store(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != DESCRIPTION_CSV_HEADER {
            return Err(JudgeError::Store(format!(
                "description store header must be {DESCRIPTION_CSV_HEADER:?}, got {header:?}"
            )));
        }
        let mut entries = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| JudgeError::Store(e.to_string()))?;
            if record.len() != 2 {
                return Err(JudgeError::Store(format!(
                    "description rows need 2 fields, got {}",
                    record.len()
                )));
            }
            entries.insert(ItemId::from(&record[0]), record[1].to_string());
        }
        Ok(DescriptionStore { entries })
    }

    /// Write the store as CSV, items in sorted order.
    pub fn save(&self, path: &Path) -> Result<(), JudgeError> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| JudgeError::Store(format!("{}: {e}", path.display())))?;
        writer
            .write_record(["item_id", "description"])
            .map_err(|e| JudgeError::Store(e.to_string()))?;
        for (item, description) in &self.entries {
            writer
                .write_record([item.as_ref(), description.as_str()])
                .map_err(|e| JudgeError::Store(e.to_string()))?;
        }
        writer.flush().map_err(|e| JudgeError::Store(e.to_string()))?;
        Ok(())
    }

    pub fn get(&self, item: &ItemId) -> Option<&str> {
        self.entries.get(item).map(String::as_str)
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.entries.contains_key(item)
    }

    pub fn insert(&mut self, item: ItemId, description: String) {
        self.entries.insert(item, description);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, &str)> {
        self.entries.iter().map(|(k, v)| (k, v.as_str()))
    }
}

/// Outcome of one description lookup or extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionResult {
    pub text: String,
    /// Client attempts consumed (0 when served from the store).
    pub attempts: usize,
    pub from_store: bool,
}

impl ExtractionResult {
    /// An empty transcription: flagged, not fatal. The item stays usable
    /// for variants that need no description.
    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

/// Default transcription instruction.
pub const DEFAULT_EXTRACTION_PROMPT: &str = "Transcribe the handwritten text on this design \
sketch. Reply with the transcription only; reply with an empty message if the sketch carries \
no text.";

/// Fetch an item's description, calling the model only on a store miss and
/// persisting the result into the store.
pub fn extract_description(
    item: &ItemId,
    image: &ImagePayload,
    store: &mut DescriptionStore,
    client: &dyn ModelClient,
    model: &str,
    prompt: &str,
    retry: &RetryPolicy,
) -> Result<ExtractionResult, JudgeError> {
    if let Some(text) = store.get(item) {
        return Ok(ExtractionResult {
            text: text.to_string(),
            attempts: 0,
            from_store: true,
        });
    }
    let request = ChatRequest {
        model: model.to_string(),
        messages: vec![ChatMessage::user(vec![
            ContentPart::text(prompt),
            ContentPart::image(image.data_url()),
        ])],
        tag: Some(item.as_ref().to_string()),
    };
    let (raw, attempts) = complete_with_retry(client, &request, retry)?;
    let text = raw.trim().to_string();
    store.insert(item.clone(), text.clone());
    Ok(ExtractionResult {
        text,
        attempts,
        from_store: false,
    })
}
