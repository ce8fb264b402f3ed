//! Provider-agnostic chat-completion client with a scriptable mock.
//!
//! The wire format is the widely adopted chat-completions shape: a JSON
//! body carrying a model name and a message list whose content is a
//! sequence of text and inline-image parts. Any host exposing that
//! endpoint works; authentication is a bearer token read from the
//! `RATER_EQUIV_API_KEY` environment variable.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the provider bearer token.
pub const API_KEY_ENV: &str = "RATER_EQUIV_API_KEY";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider response carried no message content")]
    EmptyResponse,
    #[error("missing API key: set the {0} environment variable")]
    MissingKey(String),
}

impl ClientError {
    /// Whether retrying the same request can plausibly succeed.
    pub fn retryable(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Http { status, .. } => *status == 429 || *status >= 500,
            ClientError::EmptyResponse => true,
            ClientError::MissingKey(_) => false,
        }
    }
}

/// Inline image reference carried by an image content part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

/// One part of a chat message: text or an inline (data-URL) image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

impl ContentPart {
    pub fn text(text: impl Into<String>) -> Self {
        ContentPart::Text { text: text.into() }
    }

    pub fn image(url: impl Into<String>) -> Self {
        ContentPart::ImageUrl {
            image_url: ImageUrl { url: url.into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn user(content: Vec<ContentPart>) -> Self {
        ChatMessage {
            role: "user".to_string(),
            content,
        }
    }
}

/// A chat-completion request. `tag` is a local routing label (the item id)
/// used by the mock client to pick a scripted reply; it is never serialized
/// onto the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip)]
    pub tag: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Anything that can answer a chat request with raw text.
pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError>;
}

/// Blocking HTTP client for a chat-completions-compatible host.
pub struct HttpModelClient {
    base_url: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl HttpModelClient {
    /// Build a client with the token taken from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>) -> Result<Self, ClientError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| ClientError::MissingKey(API_KEY_ENV.to_string()))?;
        Ok(Self::with_key(base_url, key))
    }

    pub fn with_key(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpModelClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            http: reqwest::blocking::Client::new(),
        }
    }
}

impl ModelClient for HttpModelClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        let url = format!("{}/chat/completions", self.base_url);
        let response = self
            .http
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| ClientError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|content| !content.is_empty())
            .ok_or(ClientError::EmptyResponse)
    }
}

/// Reply scripted for the mock client: a transport error or raw text.
const MOCK_ERROR_MARKER: &str = "<<ERROR>>";
/// Script tag matching any request without a more specific entry.
const MOCK_DEFAULT_TAG: &str = "*";

/// Deterministic in-process client scripted per request tag. Each tag owns
/// a reply queue: replies pop in order and the last one repeats forever.
/// The reply text `<<ERROR>>` simulates a transport failure. Requests with
/// no matching tag fall back to the `*` entry.
pub struct MockModelClient {
    scripts: Mutex<BTreeMap<String, VecDeque<String>>>,
    calls: AtomicUsize,
}

impl MockModelClient {
    pub fn new() -> Self {
        MockModelClient {
            scripts: Mutex::new(BTreeMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Script every request to receive `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        let client = MockModelClient::new();
        client.push(MOCK_DEFAULT_TAG, text);
        client
    }

    /// Append a reply to a tag's queue.
    pub fn push(&self, tag: impl Into<String>, reply: impl Into<String>) {
        self.scripts
            .lock()
            .expect("mock script lock")
            .entry(tag.into())
            .or_default()
            .push_back(reply.into());
    }

    /// Load a script from CSV with header `tag,response`. Repeated tags
    /// enqueue replies in file order.
    pub fn from_script_csv(path: &Path) -> Result<Self, ClientError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| ClientError::Transport(format!("script {}: {e}", path.display())))?;
        let client = MockModelClient::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| ClientError::Transport(format!("script row: {e}")))?;
            if record.len() != 2 {
                return Err(ClientError::Transport(format!(
                    "script rows need 2 fields (tag,response), got {}",
                    record.len()
                )));
            }
            client.push(&record[0], &record[1]);
        }
        Ok(client)
    }

    /// Number of completions requested so far, including failed ones.
    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Default for MockModelClient {
    fn default() -> Self {
        MockModelClient::new()
    }
}

impl ModelClient for MockModelClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut scripts = self.scripts.lock().expect("mock script lock");
        let key = request
            .tag
            .as_deref()
            .filter(|tag| scripts.contains_key(*tag))
            .unwrap_or(MOCK_DEFAULT_TAG)
            .to_string();
        let queue = scripts.get_mut(&key).ok_or_else(|| {
            ClientError::Transport(format!("no script for tag {:?}", request.tag))
        })?;
        let reply = if queue.len() > 1 {
            queue.pop_front().expect("non-empty queue")
        } else {
            queue
                .front()
                .cloned()
                .ok_or_else(|| ClientError::Transport("empty script queue".into()))?
        };
        if reply == MOCK_ERROR_MARKER {
            Err(ClientError::Transport("scripted failure".into()))
        } else {
            Ok(reply)
        }
    }
}

/// Exponential-backoff policy for transient provider failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    /// Zero-delay policy for tests and mock-backed runs.
    pub fn immediate(max_attempts: usize) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }
}

/// Issue `request`, retrying retryable failures with exponential backoff.
/// Returns the number of attempts made alongside the reply text.
pub fn complete_with_retry(
    client: &dyn ModelClient,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<(String, usize), ClientError> {
    let attempts_allowed = policy.max_attempts.max(1);
    let mut last_error = None;
    for attempt in 1..=attempts_allowed {
        match client.complete(request) {
            Ok(text) => return Ok((text, attempt)),
            Err(error) => {
                let fatal = !error.retryable();
                last_error = Some(error);
                if fatal {
                    break;
                }
                if attempt < attempts_allowed && !policy.base_delay.is_zero() {
                    std::thread::sleep(policy.base_delay * 2u32.pow(attempt as u32 - 1));
                }
            }
        }
    }
    Err(last_error.expect("at least one attempt made"))
}
