use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, InjectionError};
use crate::model::FeaturePartition;

/// Allowed distance, in whitespace tokens, between a noise candidate and the
/// mean feature length of the target partition.
pub const LENGTH_WINDOW: f64 = 3.0;

const DEFAULT_POOL: &str = include_str!("../../data/noise_pool.txt");

/// Well-formed, meaningless sentences used as nonsensical noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePool {
    sentences: Vec<String>,
}

impl Default for NoisePool {
    fn default() -> Self {
        Self::parse(DEFAULT_POOL).expect("shipped pool is non-empty")
    }
}

impl NoisePool {
    pub fn new(sentences: Vec<String>) -> Result<Self, Error> {
        let sentences: Vec<String> = sentences
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return Err(Error::Validation("noise pool is empty".into()));
        }
        Ok(Self { sentences })
    }

    /// One sentence per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, Error> {
        Self::new(text.lines().map(str::to_string).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }
}

pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn mean_feature_tokens(partition: &FeaturePartition) -> f64 {
    let total: usize = partition.features.iter().map(|f| whitespace_tokens(&f.text)).sum();
    total as f64 / partition.len() as f64
}

pub fn within_window(candidate_tokens: usize, mean: f64) -> bool {
    candidate_tokens > 0 && (candidate_tokens as f64 - mean).abs() <= LENGTH_WINDOW
}

fn trailing_ws(s: &str) -> &str {
    &s[s.trim_end().len()..]
}

/// Builds the noisy partition with `noise` inserted as feature `pos`.
///
/// The noise borrows the whitespace that separates its neighbours, so it
/// reads as one more sentence in prose and one more line at the right
/// indentation in code.
fn insert_noise(partition: &FeaturePartition, noise: &str, pos: usize) -> FeaturePartition {
    let n = partition.len();
    let texts = partition.texts();
    let noise_text = if pos == 0 {
        let ws = trailing_ws(texts[0]);
        let sep = match ws.find('\n') {
            Some(i) => &ws[..=i],
            None if ws.is_empty() => " ",
            None => ws,
        };
        format!("{noise}{sep}")
    } else {
        let prev = trailing_ws(texts[pos - 1]);
        if !prev.is_empty() {
            format!("{noise}{prev}")
        } else {
            // Only the last feature can lack trailing whitespace.
            let sep = if n >= 2 { trailing_ws(texts[n - 2]) } else { "" };
            let sep = if sep.is_empty() { " " } else { sep };
            format!("{sep}{noise}")
        }
    };
    let mut out: Vec<&str> = texts;
    out.insert(pos, &noise_text);
    FeaturePartition::from_texts(&partition.source_id, &out, &partition.splitter_name)
}

fn choose_and_insert(
    partition: &FeaturePartition,
    candidates: &[&str],
    seed: u64,
) -> Result<(FeaturePartition, usize), InjectionError> {
    if candidates.is_empty() || partition.is_empty() {
        return Err(InjectionError::NoCandidate);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = candidates[rng.random_range(0..candidates.len())];
    let pos = rng.random_range(0..=partition.len());
    Ok((insert_noise(partition, pick, pos), pos))
}

/// Inserts a length-matched nonsense sentence at a seeded random position.
pub fn inject_nonsensical(
    partition: &FeaturePartition,
    pool: &NoisePool,
    seed: u64,
) -> Result<(FeaturePartition, usize), InjectionError> {
    if partition.is_empty() {
        return Err(InjectionError::NoCandidate);
    }
    let mean = mean_feature_tokens(partition);
    let candidates: Vec<&str> = pool
        .sentences
        .iter()
        .map(String::as_str)
        .filter(|s| within_window(whitespace_tokens(s), mean))
        .collect();
    choose_and_insert(partition, &candidates, seed)
}

/// Candidate features borrowed from other instances, in dataset order.
pub fn cross_sample_candidates<'a>(partition: &FeaturePartition, dataset: &'a [FeaturePartition]) -> Vec<&'a str> {
    let mean = mean_feature_tokens(partition);
    dataset
        .iter()
        .filter(|p| p.source_id != partition.source_id)
        .flat_map(|p| p.features.iter())
        .map(|f| f.text.trim())
        .filter(|t| within_window(whitespace_tokens(t), mean))
        .collect()
}

/// Inserts a length-matched feature taken from a different instance.
pub fn inject_cross_sample(
    partition: &FeaturePartition,
    dataset: &[FeaturePartition],
    seed: u64,
) -> Result<(FeaturePartition, usize), InjectionError> {
    if partition.is_empty() {
        return Err(InjectionError::NoCandidate);
    }
    let candidates = cross_sample_candidates(partition, dataset);
    choose_and_insert(partition, &candidates, seed)
}
