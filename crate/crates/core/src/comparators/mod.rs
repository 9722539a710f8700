//! Similarity functions `s(candidate, reference)` in [0,1] between the output
//! for a perturbed input and the original output.

mod bleu;
mod codebleu;
mod dataflow;
mod embed;
mod tfidf;

use std::fmt;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use bleu::{bleu, weighted_bleu};
pub use codebleu::{codebleu, codebleu_breakdown, syntax_match, CodeBleuBreakdown};
pub use dataflow::{dataflow_match, def_use_triples, DefUse};
pub use embed::{embed_f1, HashedEmbedder, RemoteEmbedder, TokenEmbedder, DEFAULT_EMBED_DIM};
pub use tfidf::{tfidf_cosine, DocumentFrequency};

use crate::error::ComparatorError;
use crate::grammar::Language;

static TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\p{Alphabetic}\p{Nd}_]+|[^\s\p{Alphabetic}\p{Nd}_]").unwrap());

/// Word/punctuation tokenization: runs of letters, digits and `_`, and every
/// other non-whitespace character on its own.
pub fn tokenize(text: &str) -> Vec<&str> {
    TOKEN_RE.find_iter(text).map(|m| m.as_str()).collect()
}

/// 1.0 iff the strings are byte-equal.
pub fn exact_match_sim(a: &str, b: &str) -> f64 {
    if a.as_bytes() == b.as_bytes() {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorKind {
    Exact,
    Tfidf,
    Codebleu,
    EmbedF1,
}

impl fmt::Display for ComparatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparatorKind::Exact => "exact",
            ComparatorKind::Tfidf => "tfidf",
            ComparatorKind::Codebleu => "codebleu",
            ComparatorKind::EmbedF1 => "embed_f1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorConfig {
    pub kind: ComparatorKind,
    /// n-gram, weighted n-gram, syntax, data-flow.
    pub codebleu_weights: [f64; 4],
    pub keyword_weight: f64,
    pub base_weight: f64,
    pub ngram_order: usize,
    pub embedding_provider_id: Option<String>,
}

impl ComparatorConfig {
    pub fn new(kind: ComparatorKind) -> Self {
        Self {
            kind,
            codebleu_weights: [0.25; 4],
            keyword_weight: 1.0,
            base_weight: 0.2,
            ngram_order: 4,
            embedding_provider_id: None,
        }
    }

    pub fn validate(&self) -> Result<(), ComparatorError> {
        if self.codebleu_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(ComparatorError::Config("codebleu weights must be nonnegative".into()));
        }
        let sum: f64 = self.codebleu_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ComparatorError::Config(format!("codebleu weights sum to {sum}, not 1")));
        }
        if self.keyword_weight < 0.0 || self.base_weight < 0.0 {
            return Err(ComparatorError::Config("token weights must be nonnegative".into()));
        }
        if self.ngram_order == 0 {
            return Err(ComparatorError::Config("ngram_order must be positive".into()));
        }
        Ok(())
    }
}

/// A configured comparator ready to score outputs.
#[derive(Clone)]
pub struct Comparator {
    config: ComparatorConfig,
    language: Language,
    embedder: Arc<dyn TokenEmbedder>,
}

impl fmt::Debug for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Comparator")
            .field("config", &self.config)
            .field("language", &self.language)
            .finish()
    }
}

impl Comparator {
    pub fn new(config: ComparatorConfig) -> Result<Self, ComparatorError> {
        config.validate()?;
        Ok(Self {
            config,
            language: Language::Python,
            embedder: Arc::new(HashedEmbedder::default()),
        })
    }

    pub fn of_kind(kind: ComparatorKind) -> Self {
        Self::new(ComparatorConfig::new(kind)).expect("default config is valid")
    }

    /// Grammar used by the CodeBLEU syntax and data-flow components.
    pub fn with_language(mut self, language: Language) -> Self {
        self.language = language;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn TokenEmbedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn config(&self) -> &ComparatorConfig {
        &self.config
    }

    pub fn kind(&self) -> ComparatorKind {
        self.config.kind
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn name(&self) -> String {
        match self.config.kind {
            ComparatorKind::Codebleu => format!("codebleu:{}", self.language),
            k => k.to_string(),
        }
    }

    /// Scores one pair. TF-IDF statistics come from the two strings alone.
    pub fn score(&self, candidate: &str, reference: &str) -> Result<f64, ComparatorError> {
        Ok(self.score_batch(reference, &[candidate])?[0])
    }

    /// Scores every candidate against `reference`. For TF-IDF the document
    /// frequencies are built over the reference plus all candidates.
    pub fn score_batch(&self, reference: &str, candidates: &[&str]) -> Result<Vec<f64>, ComparatorError> {
        match self.config.kind {
            ComparatorKind::Exact => Ok(candidates.iter().map(|c| exact_match_sim(c, reference)).collect()),
            ComparatorKind::Tfidf => {
                let stats = DocumentFrequency::from_documents(
                    std::iter::once(reference).chain(candidates.iter().copied()),
                );
                Ok(candidates.iter().map(|c| tfidf_cosine(c, reference, &stats)).collect())
            }
            ComparatorKind::Codebleu => Ok(candidates
                .iter()
                .map(|c| codebleu(c, reference, self.language, &self.config))
                .collect()),
            ComparatorKind::EmbedF1 => candidates
                .iter()
                .map(|c| embed_f1(c, reference, self.embedder.as_ref()))
                .collect(),
        }
    }
}
