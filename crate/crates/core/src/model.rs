//! Shared data model: input documents, byte-span features, partitions,
//! coalitions, model outputs and attribution results.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ContractError, Error};

/// Largest partition a [`Coalition`] bitmask can address.
pub const MAX_FEATURES: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CodeGeneration,
    CodeSummarization,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::CodeGeneration => "code_generation",
            Task::CodeSummarization => "code_summarization",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One input `i` handed to the model under explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDocument {
    pub id: String,
    pub task: Task,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_hint: Option<String>,
}

impl InputDocument {
    pub fn new(id: impl Into<String>, task: Task, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            task,
            text: text.into(),
            language_hint: None,
        }
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language_hint = Some(language.into());
        self
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if self.text.is_empty() {
            return Err(ContractError::EmptyDocument(self.id.clone()));
        }
        Ok(())
    }
}

/// Reads a JSONL dataset, one [`InputDocument`] per non-blank line.
///
/// Empty texts and duplicate ids are rejected.
pub fn load_dataset(path: &Path) -> Result<Vec<InputDocument>, Error> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<InputDocument>, Error> {
    let mut docs: Vec<InputDocument> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: InputDocument = serde_json::from_str(&line)
            .map_err(|e| Error::Validation(format!("dataset line {}: {e}", lineno + 1)))?;
        doc.validate()?;
        if !seen.insert(doc.id.clone()) {
            return Err(ContractError::DuplicateId(doc.id).into());
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// A contiguous byte span of the input: the unit of attribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub index: usize,
    pub text: String,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl Feature {
    pub fn len(&self) -> usize {
        self.byte_end - self.byte_start
    }

    pub fn is_empty(&self) -> bool {
        self.byte_start == self.byte_end
    }
}

/// Ordered, lossless segmentation of a single input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturePartition {
    pub source_id: String,
    pub features: Vec<Feature>,
    pub splitter_name: String,
}

impl FeaturePartition {
    /// Builds a partition from consecutive feature texts; offsets are
    /// accumulated so the partition is contiguous by construction.
    pub fn from_texts<S: AsRef<str>>(
        source_id: impl Into<String>,
        texts: &[S],
        splitter_name: impl Into<String>,
    ) -> Self {
        let mut offset = 0;
        let features = texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                let t = t.as_ref();
                let feature = Feature {
                    index,
                    text: t.to_string(),
                    byte_start: offset,
                    byte_end: offset + t.len(),
                };
                offset += t.len();
                feature
            })
            .collect();
        Self {
            source_id: source_id.into(),
            features,
            splitter_name: splitter_name.into(),
        }
    }

    /// Slices `text` at the given ascending cut points. `cuts` must start at 0
    /// and end at `text.len()`, and every cut must be a char boundary.
    pub fn from_cuts(
        source_id: impl Into<String>,
        text: &str,
        cuts: &[usize],
        splitter_name: impl Into<String>,
    ) -> Result<Self, ContractError> {
        if cuts.first() != Some(&0) || cuts.last() != Some(&text.len()) {
            return Err(ContractError::BadSpans("cuts must span the whole input".into()));
        }
        let mut features = Vec::with_capacity(cuts.len().saturating_sub(1));
        for (index, w) in cuts.windows(2).enumerate() {
            let (start, end) = (w[0], w[1]);
            if start >= end && !(cuts.len() == 2 && text.is_empty()) {
                return Err(ContractError::BadSpans(format!("empty span at {start}")));
            }
            let slice = text
                .get(start..end)
                .ok_or_else(|| ContractError::BadSpans(format!("{start}..{end} is not on a char boundary")))?;
            features.push(Feature {
                index,
                text: slice.to_string(),
                byte_start: start,
                byte_end: end,
            });
        }
        Ok(Self {
            source_id: source_id.into(),
            features,
            splitter_name: splitter_name.into(),
        })
    }

    /// The whole input as one feature.
    pub fn whole(source_id: impl Into<String>, text: &str, splitter_name: impl Into<String>) -> Self {
        Self {
            source_id: source_id.into(),
            features: vec![Feature {
                index: 0,
                text: text.to_string(),
                byte_start: 0,
                byte_end: text.len(),
            }],
            splitter_name: splitter_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Ordered concatenation of all feature texts.
    pub fn text(&self) -> String {
        self.features.iter().map(|f| f.text.as_str()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.text.as_str()).collect()
    }

    /// Checks indices, contiguity and that each feature's text matches its span length.
    pub fn validate(&self) -> Result<(), ContractError> {
        if self.features.is_empty() {
            return Err(ContractError::BadSpans("partition has no features".into()));
        }
        let mut expected_start = 0;
        for (i, f) in self.features.iter().enumerate() {
            if f.index != i {
                return Err(ContractError::BadSpans(format!("feature {i} carries index {}", f.index)));
            }
            if f.byte_start != expected_start || f.byte_end < f.byte_start {
                return Err(ContractError::BadSpans(format!("feature {i} is not contiguous")));
            }
            if f.text.len() != f.len() {
                return Err(ContractError::BadSpans(format!("feature {i} text does not match its span")));
            }
            if f.is_empty() && self.features.len() > 1 {
                return Err(ContractError::BadSpans(format!("feature {i} is empty")));
            }
            expected_start = f.byte_end;
        }
        Ok(())
    }
}

/// Set of kept feature indices, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_mask(mask: u64) -> Self {
        Coalition(mask)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    /// All `n` features kept.
    pub fn full(n: usize) -> Self {
        Coalition(full_mask(n))
    }

    /// Everything except feature `i`.
    pub fn without(n: usize, i: usize) -> Self {
        Coalition(full_mask(n) & !(1u64 << i))
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Coalition(indices.into_iter().fold(0u64, |m, i| m | (1u64 << i)))
    }

    pub fn contains(&self, i: usize) -> bool {
        i < 64 && self.0 & (1u64 << i) != 0
    }

    pub fn with(&self, i: usize) -> Self {
        Coalition(self.0 | (1u64 << i))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..64).filter(move |i| self.0 & (1u64 << i) != 0)
    }

    /// True when every kept index addresses a feature of an `n`-feature partition.
    pub fn fits(&self, n: usize) -> bool {
        self.0 & !full_mask(n) == 0
    }
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Concatenates the kept features in index order; removed features
/// contribute nothing.
pub fn assemble(partition: &FeaturePartition, coalition: Coalition) -> Result<String, ContractError> {
    let n = partition.len();
    if !coalition.fits(n) {
        return Err(ContractError::CoalitionOutOfRange {
            mask: coalition.mask(),
            n_features: n,
        });
    }
    let mut out = String::new();
    for f in &partition.features {
        if coalition.contains(f.index) {
            out.push_str(&f.text);
        }
    }
    Ok(out)
}

/// A model response `o = M(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub text: String,
    pub model_id: String,
    pub prompt_hash: String,
    pub from_cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "monte_carlo",
        })
    }
}

/// Per-feature attributions for one input, with the provenance needed to
/// reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub partition: FeaturePartition,
    pub task: Task,
    pub model_id: String,
    pub comparator: String,
    /// Signed Shapley values (exact or Monte-Carlo estimate).
    pub raw: Vec<f64>,
    /// Clamped and normalized: each in [0,1], summing to one.
    pub display: Vec<f64>,
    pub mode: Mode,
    pub sampling_ratio: f64,
    pub seed: u64,
    pub coalition_count: usize,
    pub output_text: String,
}

impl AttributionResult {
    pub fn check_invariants(&self) -> Result<(), ContractError> {
        let n = self.partition.len();
        if self.raw.len() != n || self.display.len() != n {
            return Err(ContractError::BadAttribution("length mismatch".into()));
        }
        if self.display.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(ContractError::BadAttribution("display value outside [0,1]".into()));
        }
        let sum: f64 = self.display.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ContractError::BadAttribution(format!("display sums to {sum}")));
        }
        Ok(())
    }
}
