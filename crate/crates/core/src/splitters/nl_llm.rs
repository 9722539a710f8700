use log::{debug, warn};
use serde_json::Value;

use super::nl_rule::split_text_with_name;
use super::SplitterConfig;
use crate::client::{ChatMessage, ModelProvider};
use crate::error::SplitError;
use crate::model::{FeaturePartition, InputDocument};

pub const NL_LLM_NAME: &str = "nl_llm";
pub const FALLBACK_NAME: &str = "nl_rule(fallback)";

pub const SPLITTER_SYSTEM_PROMPT: &str = "You are a docstring segmenter. Split the user given docstring into granular sections.

CRITICAL REQUIREMENTS:
- You MUST always output a list of strings - no other format is acceptable
- You MUST NOT paraphrase, rewrite, or modify any text - only extract exactly as written
- Each string must be an exact substring from the original docstring
- Include all original whitespace, newlines, and formatting exactly as they appear

JSON FORMATTING REQUIREMENTS:
- Output ONLY valid JSON - an object with numeric keys and string values: {\"0\": \"string1\", \"1\": \"string2\", \"2\": \"string3\"}
- Each string value must be a meaningful coding sentence segments.
- Every key must be a string representing the index: \"0\", \"1\", \"2\", etc.
- Every value must be a string segment enclosed in double quotes
- Ensure all quotes and special characters are properly escaped

Here are examples, your response should follow this format:
";

/// A demonstration pair: a docstring and its segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IclExample {
    pub input: String,
    pub segments: Vec<String>,
}

impl IclExample {
    pub fn render(&self) -> String {
        format!(
            "INPUT:\n{}\n\nOUTPUT:\n{}",
            serde_json::to_string(&self.input).expect("string serializes"),
            render_segment_map(&self.segments)
        )
    }
}

/// `{"0": "...", "1": "..."}` with keys in index order.
pub(crate) fn render_segment_map(segments: &[String]) -> String {
    let body = segments
        .iter()
        .enumerate()
        .map(|(i, s)| format!("\"{i}\": {}", serde_json::to_string(s).expect("string serializes")))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{{{body}}}")
}

/// The shipped demonstration: a directory-search docstring in nine segments.
pub fn default_icl_examples() -> Vec<IclExample> {
    let segments = [
        "Search for a specific string within the JSON data of files in a given directory and its subdirectories. ",
        "This function recursively scans the specified directory for JSON files, ",
        "then checks each file to see if the given string is present within the JSON data structure.\n",
        "Note that: ",
        "The string search is case-sensitive and looks for a match within the structure of the JSON data,",
        " not just as a substring in the file content. ",
        "If the directory does not contain any JSON files or if no JSON files contain the string, an empty list is returned.\n",
        "The function should output with:\n",
        "    list: A list of file paths (str) containing the string within their JSON data.",
    ];
    vec![IclExample {
        input: segments.concat(),
        segments: segments.iter().map(|s| s.to_string()).collect(),
    }]
}

/// System and user messages for the first segmentation request.
pub fn splitter_messages(docstring: &str, examples: &[IclExample]) -> Vec<ChatMessage> {
    let mut system = String::from(SPLITTER_SYSTEM_PROMPT);
    for ex in examples {
        system.push_str(&ex.render());
        system.push_str("\n\n");
    }
    vec![
        ChatMessage::system(system.trim_end().to_string()),
        ChatMessage::user(format!("Docstring: {docstring}")),
    ]
}

/// Parses an indexed segment map. Tolerates surrounding prose or code
/// fences; keys must be exactly `"0".."k-1"` and values strings.
pub fn parse_segment_map(response: &str) -> Result<Vec<String>, String> {
    let start = response.find('{').ok_or("no JSON object in response")?;
    let end = response.rfind('}').ok_or("no JSON object in response")?;
    if end < start {
        return Err("no JSON object in response".into());
    }
    let value: Value = serde_json::from_str(&response[start..=end]).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("response is not a JSON object")?;
    let mut segments: Vec<Option<String>> = vec![None; obj.len()];
    for (k, v) in obj {
        let idx: usize = k
            .parse()
            .map_err(|_| format!("key {k:?} is not an index"))?;
        if idx >= segments.len() || k != &idx.to_string() {
            return Err(format!("keys are not contiguous from \"0\" (saw {k:?})"));
        }
        let s = v.as_str().ok_or_else(|| format!("value for key {k:?} is not a string"))?;
        segments[idx] = Some(s.to_string());
    }
    segments
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| "duplicate keys".to_string())
}

fn check_segments(segments: &[String], text: &str) -> Result<(), String> {
    if segments.is_empty() {
        return Err("no segments".into());
    }
    let mut offset = 0;
    for (i, s) in segments.iter().enumerate() {
        if !text[offset..].starts_with(s.as_str()) {
            return Err(format!(
                "segment {i} is not the next exact substring of the docstring"
            ));
        }
        offset += s.len();
    }
    if offset != text.len() {
        return Err("segments stop before the end of the docstring".into());
    }
    Ok(())
}

/// Segments a docstring-style prompt with a model, verifying that the
/// ordered segments reproduce the input exactly. Invalid answers are retried
/// up to `cfg.max_retries` times with a corrective follow-up; after that, or
/// on any client error, the rule-based splitter is used and the partition is
/// named `nl_rule(fallback)`.
pub fn split_nl_llm(
    doc: &InputDocument,
    client: &dyn ModelProvider,
    cfg: &SplitterConfig,
) -> Result<FeaturePartition, SplitError> {
    if doc.text.is_empty() {
        return Err(SplitError::Empty);
    }
    let mut messages = splitter_messages(&doc.text, &cfg.icl_examples);
    for attempt in 0..=cfg.max_retries {
        let reply = match client.chat(&messages) {
            Ok(out) => out.text,
            Err(e) => {
                warn!("splitter model failed for {}: {e}; using rule fallback", doc.id);
                break;
            }
        };
        let verdict = parse_segment_map(&reply).and_then(|segs| {
            check_segments(&segs, &doc.text)?;
            Ok(segs)
        });
        match verdict {
            Ok(segments) => {
                let segments: Vec<String> = segments.into_iter().filter(|s| !s.is_empty()).collect();
                return Ok(FeaturePartition::from_texts(&doc.id, &segments, NL_LLM_NAME));
            }
            Err(reason) => {
                debug!("splitter attempt {} for {} rejected: {reason}", attempt + 1, doc.id);
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(format!(
                    "Your previous answer was rejected: {reason}. Answer again with only the JSON object. \
                     The values, concatenated in key order, must reproduce the docstring exactly, \
                     including all whitespace and newlines."
                )));
            }
        }
    }
    split_text_with_name(&doc.id, &doc.text, FALLBACK_NAME)
}
