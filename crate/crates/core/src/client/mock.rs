use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{prompt_key, ChatMessage, ModelProvider};
use crate::error::ProviderError;
use crate::model::ModelOutput;

/// Condition over the prompt text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Always,
    Contains(String),
    NotContains(String),
    StartsWith(String),
    Matches(String),
}

/// What a rule answers with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockOutput {
    Text(String),
    /// The prompt itself.
    Echo,
    /// The prompt up to (excluding) its first newline.
    FirstLine,
    /// Every match of the pattern, in order, joined by single spaces.
    Extract(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub when: Predicate,
    pub output: MockOutput,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: MockRule,
    when: Option<Regex>,
    output: Option<Regex>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ScriptFile {
    #[serde(default)]
    rules: Vec<MockRule>,
    default: MockOutput,
}

/// Ordered rules plus a default; the first rule whose predicate holds wins.
/// Total over all strings and deterministic.
#[derive(Debug, Clone)]
pub struct MockScript {
    rules: Vec<CompiledRule>,
    default: (MockOutput, Option<Regex>),
}

impl MockScript {
    pub fn new(rules: Vec<MockRule>, default: MockOutput) -> Result<Self, ProviderError> {
        let rules = rules
            .into_iter()
            .map(|rule| {
                Ok(CompiledRule {
                    when: predicate_regex(&rule.when)?,
                    output: output_regex(&rule.output)?,
                    rule,
                })
            })
            .collect::<Result<Vec<_>, ProviderError>>()?;
        let default_re = output_regex(&default)?;
        Ok(Self {
            rules,
            default: (default, default_re),
        })
    }

    pub fn identity() -> Self {
        Self::new(Vec::new(), MockOutput::Echo).expect("static script")
    }

    pub fn constant(text: impl Into<String>) -> Self {
        Self::new(Vec::new(), MockOutput::Text(text.into())).expect("static script")
    }

    /// Output is every match of `pattern` in the prompt. Features that never
    /// contain a match cannot influence the output.
    pub fn extract(pattern: &str) -> Result<Self, ProviderError> {
        Self::new(Vec::new(), MockOutput::Extract(pattern.to_string()))
    }

    /// Parses the JSON script format:
    /// `{"rules": [{"when": {"contains": "sort"}, "output": {"text": "A"}}], "default": "echo"}`.
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let file: ScriptFile =
            serde_json::from_str(json).map_err(|e| ProviderError::Config(format!("mock script: {e}")))?;
        Self::new(file.rules, file.default)
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn respond(&self, prompt: &str) -> String {
        for compiled in &self.rules {
            let holds = match &compiled.rule.when {
                Predicate::Always => true,
                Predicate::Contains(s) => prompt.contains(s.as_str()),
                Predicate::NotContains(s) => !prompt.contains(s.as_str()),
                Predicate::StartsWith(s) => prompt.starts_with(s.as_str()),
                Predicate::Matches(_) => compiled.when.as_ref().is_some_and(|re| re.is_match(prompt)),
            };
            if holds {
                return render(&compiled.rule.output, compiled.output.as_ref(), prompt);
            }
        }
        render(&self.default.0, self.default.1.as_ref(), prompt)
    }
}

fn predicate_regex(when: &Predicate) -> Result<Option<Regex>, ProviderError> {
    match when {
        Predicate::Matches(p) => Regex::new(p)
            .map(Some)
            .map_err(|e| ProviderError::Config(format!("mock predicate: {e}"))),
        _ => Ok(None),
    }
}

fn output_regex(output: &MockOutput) -> Result<Option<Regex>, ProviderError> {
    match output {
        MockOutput::Extract(p) => Regex::new(p)
            .map(Some)
            .map_err(|e| ProviderError::Config(format!("mock output: {e}"))),
        _ => Ok(None),
    }
}

fn render(output: &MockOutput, re: Option<&Regex>, prompt: &str) -> String {
    match output {
        MockOutput::Text(t) => t.clone(),
        MockOutput::Echo => prompt.to_string(),
        MockOutput::FirstLine => prompt.split('\n').next().unwrap_or("").to_string(),
        MockOutput::Extract(_) => {
            let re = re.expect("extract output carries a regex");
            re.find_iter(prompt).map(|m| m.as_str()).collect::<Vec<_>>().join(" ")
        }
    }
}

/// Text a mock sees for a request: the lone message's content, or all
/// contents joined by blank lines.
fn flatten(messages: &[ChatMessage]) -> String {
    match messages {
        [m] => m.content.clone(),
        _ => messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n"),
    }
}

/// Offline provider driven by a [`MockScript`]. Never touches the network.
#[derive(Debug, Clone)]
pub struct MockProvider {
    model_id: String,
    script: MockScript,
}

impl MockProvider {
    pub fn new(model_id: impl Into<String>, script: MockScript) -> Self {
        Self {
            model_id: model_id.into(),
            script,
        }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ModelProvider for MockProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        Ok(ModelOutput {
            text: self.script.respond(&flatten(messages)),
            model_id: self.model_id.clone(),
            prompt_hash: prompt_key(messages),
            from_cache: false,
        })
    }
}

type ResponderFn = dyn Fn(&[ChatMessage]) -> Result<String, ProviderError> + Send + Sync;

/// Provider backed by a closure; handy for scripted multi-turn tests.
pub struct FnProvider {
    model_id: String,
    f: Box<ResponderFn>,
}

impl FnProvider {
    pub fn new<F>(model_id: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[ChatMessage]) -> Result<String, ProviderError> + Send + Sync + 'static,
    {
        Self {
            model_id: model_id.into(),
            f: Box::new(f),
        }
    }
}

impl ModelProvider for FnProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn chat(&self, messages: &[ChatMessage]) -> Result<ModelOutput, ProviderError> {
        Ok(ModelOutput {
            text: (self.f)(messages)?,
            model_id: self.model_id.clone(),
            prompt_hash: prompt_key(messages),
            from_cache: false,
        })
    }
}
