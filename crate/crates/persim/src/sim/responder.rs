//! Pluggable response backends: the trait, a deterministic offline mock, and
//! an HTTP client for chat-completion endpoints.

use std::time::Duration;

use thiserror::Error;

use crate::scale::LikertScale;
use crate::sim::PromptText;

/// Failure modes of a single completion request.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponderError {
    /// Connection-level failure (DNS, refused, timeout); retryable.
    #[error("transport failure: {0}")]
    Transport(String),
    /// Non-success HTTP status.
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    /// The reply arrived but did not have the expected shape.
    #[error("malformed reply: {0}")]
    Protocol(String),
}

impl ResponderError {
    /// Only transport failures are worth retrying; a status or protocol
    /// error would just repeat.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ResponderError::Transport(_))
    }
}

/// A completion backend: one prompt in, one raw reply text out.
pub trait Responder: Sync {
    fn complete(&self, prompt: &PromptText) -> Result<String, ResponderError>;

    /// Whether `complete` may be called from several threads at once. The
    /// simulation harness serializes requests when this is false.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over the seed bytes (little endian) followed by the payload bytes.
/// Chosen for byte-level stability across platforms and releases.
fn seeded_fnv1a(seed: u64, payload: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in seed.to_le_bytes().iter().chain(payload) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministic offline responder: the answer to a prompt is a stable
/// seeded hash of the prompt bytes mapped into the response range, so two
/// runs with the same seed produce byte-identical response matrices.
#[derive(Debug, Clone)]
pub struct MockResponder {
    seed: u64,
    min: i32,
    max: i32,
}

impl MockResponder {
    /// Mock over the default 1..5 response range.
    pub fn new(seed: u64) -> Self {
        MockResponder { seed, min: 1, max: 5 }
    }

    pub fn for_scale(seed: u64, likert: &LikertScale) -> Self {
        MockResponder {
            seed,
            min: likert.min,
            max: likert.max,
        }
    }

    /// The answer value for a prompt, exposed so tests can replay the
    /// mapping independently of `complete`'s string formatting.
    pub fn answer_for(&self, prompt: &str) -> i32 {
        let span = (self.max - self.min + 1) as u64;
        self.min + (seeded_fnv1a(self.seed, prompt.as_bytes()) % span) as i32
    }
}

impl Responder for MockResponder {
    fn complete(&self, prompt: &PromptText) -> Result<String, ResponderError> {
        Ok(self.answer_for(&prompt.text).to_string())
    }
}

/// Chat-completion HTTP backend.
///
/// Sends `POST {endpoint}/chat/completions` with a single user message and
/// reads `choices[0].message.content` from the JSON reply. The bearer
/// credential is optional; endpoints that need none (local inference
/// servers) work without it.
pub struct HttpResponder {
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpResponder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        api_key: Option<String>,
    ) -> Result<Self, ResponderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ResponderError::Transport(e.to_string()))?;
        let mut endpoint = endpoint.into();
        while endpoint.ends_with('/') {
            endpoint.pop();
        }
        Ok(HttpResponder {
            endpoint,
            model: model.into(),
            temperature,
            api_key,
            client,
        })
    }
}

impl Responder for HttpResponder {
    fn complete(&self, prompt: &PromptText) -> Result<String, ResponderError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt.text}],
        });
        let mut request = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| ResponderError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| ResponderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ResponderError::Status {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        let parsed: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ResponderError::Protocol(format!("invalid JSON: {e}")))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| {
                ResponderError::Protocol("missing choices[0].message.content".into())
            })
    }
}
