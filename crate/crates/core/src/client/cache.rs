use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{prompt_key, prompt_text, ChatMessage, ModelProvider};
use crate::error::ProviderError;
use crate::model::ModelOutput;

/// On-disk body of one cached response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt: String,
    pub model_id: String,
    pub text: String,
    pub created_at: String,
}

/// Content-addressed response store: an in-memory map, optionally backed by
/// `{dir}/{model_id}/{sha256-hex}.json`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<(String, String), String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            memory: RwLock::default(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Path of the entry for `(model_id, key)`. Characters outside
    /// `[A-Za-z0-9._-]` in the model id become `_`.
    pub fn entry_path(&self, model_id: &str, key: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(sanitize(model_id)).join(format!("{key}.json")))
    }

    pub fn get(&self, model_id: &str, key: &str) -> Option<String> {
        let mkey = (model_id.to_string(), key.to_string());
        if let Some(text) = self.memory.read().unwrap().get(&mkey) {
            return Some(text.clone());
        }
        let path = self.entry_path(model_id, key)?;
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.model_id == model_id => {
                self.memory.write().unwrap().insert(mkey, entry.text.clone());
                Some(entry.text)
            }
            Ok(_) | Err(_) => {
                warn!("ignoring corrupt cache entry {}", path.display());
                None
            }
        }
    }

    pub fn put(&self, model_id: &str, key: &str, prompt: &str, text: &str) -> std::io::Result<()> {
        self.memory
            .write()
            .unwrap()
            .insert((model_id.to_string(), key.to_string()), text.to_string());
        let Some(path) = self.entry_path(model_id, key) else {
            return Ok(());
        };
        let entry = CacheEntry {
            prompt: prompt.to_string(),
            model_id: model_id.to_string(),
            text: text.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent)?;
        // Write-then-rename so concurrent readers never see a partial file.
        let tmp = parent.join(format!(
            ".{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(&entry)?)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }
}

fn sanitize(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

/// Serves repeated requests from a [`ResponseCache`].
pub struct CachedProvider<P> {
    inner: P,
    cache: Arc<ResponseCache>,
}

impl<P: ModelProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl<P: ModelProvider> ModelProvider for CachedProvider<P> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        let model_id = self.inner.model_id();
        let key = prompt_key(messages);
        if let Some(text) = self.cache.get(model_id, &key) {
            return Ok(ModelOutput {
                text,
                model_id: model_id.to_string(),
                prompt_hash: key,
                from_cache: true,
            });
        }
        let out = self.inner.chat(messages)?;
        if let Err(e) = self.cache.put(model_id, &key, &prompt_text(messages), &out.text) {
            warn!("could not persist cache entry {key}: {e}");
        }
        Ok(ModelOutput {
            prompt_hash: key,
            from_cache: false,
            ..out
        })
    }
}
