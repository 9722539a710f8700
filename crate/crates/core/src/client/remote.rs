use std::sync::{Condvar, Mutex};
use std::thread;

use log::{debug, warn};
use serde_json::{json, Value};

use super::{prompt_key, ChatMessage, ModelProvider, ProviderConfig};
use crate::error::ProviderError;
use crate::model::ModelOutput;

/// Counting semaphore bounding in-flight requests.
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Client for `POST {endpoint}/chat/completions` with greedy decoding.
pub struct RemoteProvider {
    cfg: ProviderConfig,
    http: reqwest::blocking::Client,
    permits: Permits,
}

impl RemoteProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        let permits = Permits::new(cfg.max_concurrency);
        Ok(Self { cfg, http, permits })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<String, (ProviderError, bool)> {
        let mut req = self.http.post(self.url()).json(body);
        let key = std::env::var(&self.cfg.credential_env_var).ok();
        if let Some(key) = &key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (ProviderError::Network(e.to_string()), true))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| (ProviderError::Network(e.to_string()), true))?;
        if matches!(status.as_u16(), 401 | 403) && key.is_none() {
            return Err((ProviderError::MissingCredential(self.cfg.credential_env_var.clone()), false));
        }
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err((
                ProviderError::Http {
                    status: status.as_u16(),
                    message: text.chars().take(500).collect(),
                },
                retryable,
            ));
        }
        parse_completion(&text).map_err(|e| (e, false))
    }
}

/// Extracts `choices[0].message.content` from a chat-completions body.
pub(crate) fn parse_completion(body: &str) -> Result<String, ProviderError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
}

impl ModelProvider for RemoteProvider {
    fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        let body = json!({
            "model": self.cfg.model_id,
            "messages": messages,
            "temperature": 0,
        });
        let _permit = self.permits.acquire();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(ModelOutput {
                        text,
                        model_id: self.cfg.model_id.clone(),
                        prompt_hash: prompt_key(messages),
                        from_cache: false,
                    })
                }
                Err((err, retryable)) if retryable && attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff_base * 2u32.pow(attempt as u32);
                    warn!("request to {} failed ({err}); retrying in {wait:?}", self.url());
                    thread::sleep(wait);
                    attempt += 1;
                }
                Err((err, _)) => {
                    debug!("giving up after {} attempts", attempt + 1);
                    return Err(err);
                }
            }
        }
    }
}
