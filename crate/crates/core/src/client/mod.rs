//! Generation model access: a remote chat-completions provider, a scripted
//! mock, and a content-addressed response cache that wraps either.

mod cache;
mod mock;
mod remote;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CacheEntry, CachedProvider, ResponseCache};
pub use mock::{FnProvider, MockOutput, MockProvider, MockRule, MockScript, Predicate};
pub use remote::RemoteProvider;

use crate::error::ProviderError;
use crate::model::ModelOutput;

pub const DEFAULT_CREDENTIAL_VAR: &str = "FS_API_KEY";
pub const CACHE_DIR_VAR: &str = "FS_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// A generation model. Implementations must be deterministic per
/// `(model_id, messages)` and callable from several threads at once.
pub trait ModelProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError>;

    /// Task inference: a single user-role message.
    fn generate(&self, prompt: &str) -> Result<ModelOutput, ProviderError> {
        self.chat(&[ChatMessage::user(prompt)])
    }
}

impl<P: ModelProvider + ?Sized> ModelProvider for &P {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        (**self).chat(messages)
    }
}

impl<P: ModelProvider + ?Sized> ModelProvider for Arc<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        (**self).chat(messages)
    }
}

impl<P: ModelProvider + ?Sized> ModelProvider for Box<P> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        (**self).chat(messages)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache key of a request. A lone user message hashes to `sha256(prompt)`;
/// anything else hashes its JSON serialization.
pub fn prompt_key(messages: &[ChatMessage]) -> String {
    match messages {
        [m] if m.role == Role::User => sha256_hex(m.content.as_bytes()),
        _ => sha256_hex(&serde_json::to_vec(messages).expect("messages serialize")),
    }
}

/// The text a cache entry records for a request.
pub(crate) fn prompt_text(messages: &[ChatMessage]) -> String {
    match messages {
        [m] if m.role == Role::User => m.content.clone(),
        _ => serde_json::to_string(messages).expect("messages serialize"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub credential_env_var: String,
    /// Must be 0; anything else is refused.
    pub temperature: f64,
    pub max_retries: usize,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Upper bound on in-flight requests to this endpoint.
    pub max_concurrency: usize,
    pub backoff_base: Duration,
}

impl ProviderConfig {
    pub fn new(endpoint_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            credential_env_var: DEFAULT_CREDENTIAL_VAR.to_string(),
            temperature: 0.0,
            max_retries: 3,
            timeout: Duration::from_secs(120),
            cache_dir: std::env::var_os(CACHE_DIR_VAR).map(PathBuf::from),
            max_concurrency: 8,
            backoff_base: Duration::from_millis(500),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.temperature != 0.0 {
            return Err(ProviderError::Config(format!(
                "temperature must be 0, got {}",
                self.temperature
            )));
        }
        if self.model_id.is_empty() {
            return Err(ProviderError::Config("model id is empty".into()));
        }
        if self.max_concurrency == 0 {
            return Err(ProviderError::Config("max_concurrency must be positive".into()));
        }
        Ok(())
    }
}
