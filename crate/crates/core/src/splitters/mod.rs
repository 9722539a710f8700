//! Splitters turn an input into an ordered, lossless [`FeaturePartition`].
//!
//! * [`split_code`] slices a single function at its top-level statements.
//! * [`split_nl_llm`] asks a model to segment a docstring-style prompt and
//!   checks the answer byte-for-byte, falling back to [`split_nl_rule`].
//! * [`split_nl_rule`] cuts at sentence terminators and newline runs.

mod code;
mod nl_llm;
mod nl_rule;

use serde::{Deserialize, Serialize};

pub use code::{split_code, statement_starts};
pub use nl_llm::{
    default_icl_examples, parse_segment_map, splitter_messages, split_nl_llm, IclExample,
    SPLITTER_SYSTEM_PROMPT,
};
pub use nl_rule::split_nl_rule;

use crate::client::ModelProvider;
use crate::error::SplitError;
use crate::model::{FeaturePartition, InputDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterKind {
    Code,
    NlLlm,
    NlRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitterConfig {
    pub kind: SplitterKind,
    pub llm_model_id: Option<String>,
    pub max_retries: usize,
    pub icl_examples: Vec<IclExample>,
}

impl SplitterConfig {
    pub fn code() -> Self {
        Self {
            kind: SplitterKind::Code,
            llm_model_id: None,
            max_retries: 3,
            icl_examples: Vec::new(),
        }
    }

    pub fn nl_rule() -> Self {
        Self {
            kind: SplitterKind::NlRule,
            ..Self::code()
        }
    }

    pub fn nl_llm(model_id: impl Into<String>) -> Self {
        Self {
            kind: SplitterKind::NlLlm,
            llm_model_id: Some(model_id.into()),
            max_retries: 3,
            icl_examples: default_icl_examples(),
        }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if self.kind == SplitterKind::NlLlm {
            if self.llm_model_id.as_deref().is_none_or(str::is_empty) {
                return Err(SplitError::Config("nl_llm requires llm_model_id".into()));
            }
            if self.icl_examples.is_empty() {
                return Err(SplitError::Config("nl_llm requires at least one in-context example".into()));
            }
            if self.max_retries == 0 {
                return Err(SplitError::Config("max_retries must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Runs the configured splitter and refuses any partition that is not
/// lossless with respect to `doc.text`.
pub fn split(
    doc: &InputDocument,
    cfg: &SplitterConfig,
    client: Option<&dyn ModelProvider>,
) -> Result<FeaturePartition, SplitError> {
    cfg.validate()?;
    let partition = match cfg.kind {
        SplitterKind::Code => split_code(doc)?,
        SplitterKind::NlRule => split_nl_rule(doc)?,
        SplitterKind::NlLlm => {
            let client = client.ok_or_else(|| SplitError::Config("nl_llm needs a model client".into()))?;
            split_nl_llm(doc, client, cfg)?
        }
    };
    if !verify_lossless(&partition, doc) {
        return Err(SplitError::NotLossless);
    }
    Ok(partition)
}

/// True iff the ordered concatenation of the features equals `doc.text`
/// byte-for-byte and the spans are well formed.
pub fn verify_lossless(partition: &FeaturePartition, doc: &InputDocument) -> bool {
    if partition.validate().is_err() {
        return false;
    }
    let mut rebuilt = Vec::with_capacity(doc.text.len());
    for f in &partition.features {
        rebuilt.extend_from_slice(f.text.as_bytes());
    }
    rebuilt == doc.text.as_bytes()
}
