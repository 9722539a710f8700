use std::sync::LazyLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::Value;

use crate::client::{ChatMessage, ModelProvider};
use crate::error::{AttributorError, ContractError};

pub const ATTRIBUTOR_SYSTEM_PROMPT: &str = "You are a code feature attribution analyst.
Your task is to evaluate the importance of individual features in contributing to a given model output.
Feature attribution scoring measures how much each feature contributes to the meaning captured in the model output.
A higher score (1) indicates that the feature is more essential for understanding what the code does, while a lower score (0) indicates the feature is less relevant or even misleading.

CRITICAL REQUIREMENTS:
- All attribution scores MUST be between 0.0 and 1.0
- The sum of all attribution scores MUST equal exactly 1.0
- Provide exactly one score per feature";

/// Accepted distance of the returned scores' sum from 1.
pub const SUM_TOLERANCE: f64 = 0.01;
pub const DEFAULT_ATTRIBUTOR_RETRIES: usize = 3;

/// True iff the noisy output is byte-identical to the original.
pub fn filter_unchanged(original_output: &str, noisy_output: &str) -> bool {
    original_output.as_bytes() == noisy_output.as_bytes()
}

/// The attribution the injected feature received.
pub fn noise_score(attribution: &[f64], noise_index: usize) -> Result<f64, ContractError> {
    attribution.get(noise_index).copied().ok_or(ContractError::IndexOutOfRange {
        index: noise_index,
        len: attribution.len(),
    })
}

/// `n` uniform draws in [0, 1) divided by their sum.
pub fn random_baseline(n: usize, seed: u64) -> Vec<f64> {
    assert!(n >= 1, "random baseline needs at least one feature");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let draws: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 {
            return draws.into_iter().map(|x| x / sum).collect();
        }
    }
}

pub fn attributor_user_prompt(prompt: &str, model_output: &str, features: &[&str]) -> String {
    let list = serde_json::to_string(features).expect("strings serialize");
    format!(
        "Prompt: {prompt}\nModel output: {model_output}\nPlease assign an attribution score to each of the following features: {list}\nRemember that the sum of the feature attribution scores has to be 1."
    )
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?").expect("valid regex"));

fn as_score(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn from_array(text: &str) -> Option<Vec<f64>> {
    let (start, end) = (text.find('[')?, text.rfind(']')?);
    if end < start {
        return None;
    }
    match serde_json::from_str::<Value>(&text[start..=end]).ok()? {
        Value::Array(items) => items.iter().map(as_score).collect(),
        _ => None,
    }
}

/// Objects keyed by feature position (0- or 1-based) or by feature text.
fn from_object(text: &str, features: &[&str]) -> Option<Vec<f64>> {
    let (start, end) = (text.find('{')?, text.rfind('}')?);
    if end < start {
        return None;
    }
    let Value::Object(map) = serde_json::from_str::<Value>(&text[start..=end]).ok()? else {
        return None;
    };
    if map.len() != features.len() {
        return None;
    }
    let numeric: Option<Vec<(usize, f64)>> = map
        .iter()
        .map(|(k, v)| Some((k.trim().parse::<usize>().ok()?, as_score(v)?)))
        .collect();
    if let Some(mut pairs) = numeric {
        pairs.sort_by_key(|(k, _)| *k);
        let base = pairs.first()?.0;
        if base > 1 || pairs.iter().enumerate().any(|(i, (k, _))| *k != base + i) {
            return None;
        }
        return Some(pairs.into_iter().map(|(_, v)| v).collect());
    }
    features
        .iter()
        .map(|f| map.get(*f).or_else(|| map.get(f.trim())).and_then(as_score))
        .collect()
}

/// Extracts one score per feature from a free-form reply and checks the
/// range and sum rules. Scores within tolerance are rescaled to sum to 1.
pub fn parse_attribution(text: &str, features: &[&str]) -> Result<Vec<f64>, String> {
    let n = features.len();
    let scores = from_array(text)
        .filter(|s| s.len() == n)
        .or_else(|| from_object(text, features))
        .or_else(|| {
            let all: Vec<f64> = NUMBER.find_iter(text).filter_map(|m| m.as_str().parse().ok()).collect();
            (all.len() == n).then_some(all)
        })
        .ok_or_else(|| format!("could not read exactly {n} scores"))?;
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(format!("score {bad} outside [0, 1]"));
    }
    let sum: f64 = scores.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE + 1e-9 {
        return Err(format!("scores sum to {sum}, not 1"));
    }
    if sum == 1.0 {
        Ok(scores)
    } else {
        Ok(scores.into_iter().map(|s| s / sum).collect())
    }
}

/// Asks `provider` to distribute attribution over `features`.
pub fn llm_attributor(
    prompt: &str,
    model_output: &str,
    features: &[&str],
    provider: &dyn ModelProvider,
    max_retries: usize,
) -> Result<Vec<f64>, AttributorError> {
    let mut messages = vec![
        ChatMessage::system(ATTRIBUTOR_SYSTEM_PROMPT),
        ChatMessage::user(attributor_user_prompt(prompt, model_output, features)),
    ];
    let mut reason = String::new();
    for _ in 0..=max_retries {
        let reply = provider.chat(&messages)?;
        match parse_attribution(&reply.text, features) {
            Ok(scores) => return Ok(scores),
            Err(why) => {
                messages.push(ChatMessage::assistant(reply.text));
                messages.push(ChatMessage::user(format!(
                    "That answer was invalid ({why}). Reply with a JSON list of exactly {} scores between 0.0 and 1.0 that sum to 1.0.",
                    features.len()
                )));
                reason = why;
            }
        }
    }
    Err(AttributorError::Rejected {
        attempts: max_retries + 1,
        reason,
    })
}
