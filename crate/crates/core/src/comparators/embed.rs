use std::collections::HashMap;
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenize;
use crate::error::ComparatorError;

pub const DEFAULT_EMBED_DIM: usize = 256;

/// Maps a token sequence to one vector per token.
pub trait TokenEmbedder: Send + Sync {
    fn embed(&self, tokens: &[&str]) -> Result<Vec<Vec<f64>>, ComparatorError>;
}

/// Deterministic offline embedding: the token and its boundary-marked
/// character trigrams are hashed into signed buckets, then L2-normalized.
/// Tokens that share spelling share direction.
#[derive(Debug)]
pub struct HashedEmbedder {
    dim: usize,
    memo: RwLock<HashMap<String, Vec<f64>>>,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBED_DIM)
    }
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            memo: RwLock::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.memo.read().unwrap().get(token) {
            return v.clone();
        }
        let mut v = vec![0.0; self.dim];
        let marked: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut add = |feature: &str| {
            let digest = Sha256::digest(feature.as_bytes());
            let h = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        };
        add(&format!("w:{token}"));
        for w in marked.windows(3) {
            add(&format!("g:{}", w.iter().collect::<String>()));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        self.memo.write().unwrap().insert(token.to_string(), v.clone());
        v
    }
}

impl TokenEmbedder for HashedEmbedder {
    fn embed(&self, tokens: &[&str]) -> Result<Vec<Vec<f64>>, ComparatorError> {
        Ok(tokens.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Embedding endpoint speaking `{"tokens": [...]}` -> `{"vectors": [[...], ...]}`.
pub struct RemoteEmbedder {
    url: String,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>) -> Result<Self, ComparatorError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| ComparatorError::Config(e.to_string()))?;
        Ok(Self { url: url.into(), http })
    }
}

impl TokenEmbedder for RemoteEmbedder {
    fn embed(&self, tokens: &[&str]) -> Result<Vec<Vec<f64>>, ComparatorError> {
        let resp = self
            .http
            .post(&self.url)
            .json(&EmbedRequest { tokens })
            .send()
            .map_err(|e| ComparatorError::Provider(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ComparatorError::Provider(format!("HTTP {}", resp.status().as_u16())));
        }
        let body: EmbedResponse = resp.json().map_err(|e| ComparatorError::Provider(e.to_string()))?;
        if body.vectors.len() != tokens.len() {
            return Err(ComparatorError::Provider(format!(
                "{} vectors for {} tokens",
                body.vectors.len(),
                tokens.len()
            )));
        }
        if let Some(first) = body.vectors.first() {
            if body.vectors.iter().any(|v| v.len() != first.len()) {
                return Err(ComparatorError::Provider("inconsistent vector dimensions".into()));
            }
        }
        Ok(body.vectors)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean over `from` of the best (nonnegative) cosine against `to`.
fn greedy(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|a| to.iter().map(|b| cosine(a, b)).fold(0.0_f64, f64::max))
        .sum();
    sum / from.len() as f64
}

/// Greedy-matching F1 over token embeddings: precision matches each
/// candidate token to its closest reference token, recall the reverse.
pub fn embed_f1(candidate: &str, reference: &str, provider: &dyn TokenEmbedder) -> Result<f64, ComparatorError> {
    if candidate == reference && !candidate.is_empty() {
        return Ok(1.0);
    }
    let cand = tokenize(candidate);
    let refs = tokenize(reference);
    if cand.is_empty() || refs.is_empty() {
        return Ok(0.0);
    }
    let cv = provider.embed(&cand)?;
    let rv = provider.embed(&refs)?;
    if cv.len() != cand.len() || rv.len() != refs.len() {
        return Err(ComparatorError::Provider("provider returned the wrong number of vectors".into()));
    }
    let p = greedy(&cv, &rv);
    let r = greedy(&rv, &cv);
    if p + r <= 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * p * r / (p + r)).clamp(0.0, 1.0))
}
