//! Noise-injection evaluation: build noisy instances, keep only those whose
//! output is unchanged, and score how much attribution each attributor
//! gives the injected feature.

mod attributor;
mod noise;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use attributor::{
    attributor_user_prompt, filter_unchanged, llm_attributor, noise_score, parse_attribution, random_baseline,
    ATTRIBUTOR_SYSTEM_PROMPT, DEFAULT_ATTRIBUTOR_RETRIES, SUM_TOLERANCE,
};
pub use noise::{
    cross_sample_candidates, inject_cross_sample, inject_nonsensical, mean_feature_tokens, whitespace_tokens,
    within_window, NoisePool, LENGTH_WINDOW,
};

use crate::client::ModelProvider;
use crate::comparators::{Comparator, ComparatorKind};
use crate::error::{ContractError, Error};
use crate::grammar::Language;
use crate::model::{FeaturePartition, InputDocument, Mode, Task};
use crate::pipeline::{attribute_partition, AttributionConfig};
use crate::sampler::DEFAULT_EXACT_CAP;
use crate::splitters::{split, SplitterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    Nonsensical,
    CrossSample,
}

impl fmt::Display for InjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InjectionMode::Nonsensical => "nonsensical",
            InjectionMode::CrossSample => "cross_sample",
        })
    }
}

impl FromStr for InjectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonsensical" => Ok(InjectionMode::Nonsensical),
            "cross-sample" | "cross_sample" => Ok(InjectionMode::CrossSample),
            other => Err(format!("unknown injection mode `{other}`")),
        }
    }
}

/// One line of the noisy-instance interchange file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyInstance {
    pub instance_id: String,
    pub mode: InjectionMode,
    pub features: Vec<String>,
    pub noise_index: usize,
    pub seed: u64,
}

impl NoisyInstance {
    pub fn partition(&self) -> FeaturePartition {
        FeaturePartition::from_texts(&self.instance_id, &self.features, format!("noisy:{}", self.mode))
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if self.noise_index >= self.features.len() {
            return Err(ContractError::IndexOutOfRange {
                index: self.noise_index,
                len: self.features.len(),
            });
        }
        Ok(())
    }
}

/// Per-instance seed derived from the run seed and the instance id.
pub fn instance_seed(run_seed: u64, instance_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(instance_id.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Code is split structurally; generation prompts are prose.
pub fn default_splitter(task: Task) -> SplitterConfig {
    match task {
        Task::CodeGeneration => SplitterConfig::nl_rule(),
        Task::CodeSummarization => SplitterConfig::code(),
    }
}

/// Default comparator for a task's output: CodeBLEU for generated code,
/// embedding F1 for summaries.
pub fn default_comparator(doc: &InputDocument) -> Result<Comparator, Error> {
    Ok(match doc.task {
        Task::CodeGeneration => {
            Comparator::of_kind(ComparatorKind::Codebleu).with_language(Language::from_hint(doc.language_hint.as_deref())?)
        }
        Task::CodeSummarization => Comparator::of_kind(ComparatorKind::EmbedF1),
    })
}

#[derive(Debug, Clone)]
pub struct InjectConfig {
    pub mode: InjectionMode,
    pub seed: u64,
    pub pool: NoisePool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectionRun {
    pub instances: Vec<NoisyInstance>,
    /// Instances that could not be injected, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Splits every document and injects one noise feature into each.
pub fn inject_dataset<F>(
    docs: &[InputDocument],
    splitter_for: F,
    splitter_client: Option<&dyn ModelProvider>,
    cfg: &InjectConfig,
) -> Result<InjectionRun, Error>
where
    F: Fn(&InputDocument) -> SplitterConfig,
{
    let mut run = InjectionRun::default();
    let mut partitions = Vec::with_capacity(docs.len());
    for doc in docs {
        match split(doc, &splitter_for(doc), splitter_client) {
            Ok(p) => partitions.push(p),
            Err(e) => {
                warn!("{}: not split: {e}", doc.id);
                run.skipped.push((doc.id.clone(), e.to_string()));
            }
        }
    }
    for p in &partitions {
        let seed = instance_seed(cfg.seed, &p.source_id);
        let injected = match cfg.mode {
            InjectionMode::Nonsensical => inject_nonsensical(p, &cfg.pool, seed),
            InjectionMode::CrossSample => inject_cross_sample(p, &partitions, seed),
        };
        match injected {
            Ok((noisy, noise_index)) => run.instances.push(NoisyInstance {
                instance_id: p.source_id.clone(),
                mode: cfg.mode,
                features: noisy.features.into_iter().map(|f| f.text).collect(),
                noise_index,
                seed,
            }),
            Err(e) => {
                warn!("{}: {e}", p.source_id);
                run.skipped.push((p.source_id.clone(), e.to_string()));
            }
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttributorKind {
    Shapley,
    Random,
    Llm,
}

impl AttributorKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttributorKind::Shapley => "shapley",
            AttributorKind::Random => "random",
            AttributorKind::Llm => "llm",
        }
    }

    /// Comma-separated list, e.g. `shapley,random`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let k = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err("no attributors given".into());
        }
        Ok(out)
    }
}

impl FromStr for AttributorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shapley" => Ok(AttributorKind::Shapley),
            "random" => Ok(AttributorKind::Random),
            "llm" => Ok(AttributorKind::Llm),
            other => Err(format!("unknown attributor `{other}`")),
        }
    }
}

impl fmt::Display for AttributorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub attributors: Vec<AttributorKind>,
    pub mode: Mode,
    pub sampling_ratio: f64,
    pub exact_cap: usize,
    /// Overrides the per-task default comparator.
    pub comparator: Option<ComparatorKind>,
    pub attributor_retries: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            attributors: vec![AttributorKind::Shapley, AttributorKind::Random],
            mode: Mode::Exact,
            sampling_ratio: 1.0,
            exact_cap: DEFAULT_EXACT_CAP,
            comparator: None,
            attributor_retries: DEFAULT_ATTRIBUTOR_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub instance_id: String,
    pub task: Task,
    pub mode: InjectionMode,
    pub noisy_partition: FeaturePartition,
    pub noise_index: usize,
    pub original_output: String,
    pub noisy_output: String,
    pub retained: bool,
    pub noise_scores: BTreeMap<String, f64>,
    /// Why a retained instance has no scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl EvaluationRecord {
    pub fn is_scored(&self) -> bool {
        self.retained && self.skipped.is_none()
    }
}

/// Per-instance noise scores of every attributor, as read by the statistics step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub task: Task,
    pub model: String,
    pub instance_id: String,
    pub mode: InjectionMode,
    pub n_features: usize,
    pub scores: BTreeMap<String, f64>,
}

fn scores_for(
    doc: &InputDocument,
    inst: &NoisyInstance,
    partition: &FeaturePartition,
    noisy_output: &str,
    model: &dyn ModelProvider,
    judge: Option<&dyn ModelProvider>,
    cfg: &EvaluateConfig,
) -> Result<BTreeMap<String, f64>, Error> {
    let mut scores = BTreeMap::new();
    for kind in &cfg.attributors {
        let attribution = match kind {
            AttributorKind::Shapley => {
                let comparator = match cfg.comparator {
                    Some(k) => Comparator::of_kind(k).with_language(Language::from_hint(doc.language_hint.as_deref())?),
                    None => default_comparator(doc)?,
                };
                let acfg = AttributionConfig {
                    mode: cfg.mode,
                    sampling_ratio: cfg.sampling_ratio,
                    seed: inst.seed,
                    exact_cap: cfg.exact_cap,
                    parallelism: 1,
                };
                attribute_partition(doc.task, partition, model, &comparator, &acfg)?.display
            }
            AttributorKind::Random => random_baseline(partition.len(), instance_seed(inst.seed, "random")),
            AttributorKind::Llm => {
                let judge = judge.ok_or_else(|| Error::Validation("the llm attributor needs a judge model".into()))?;
                llm_attributor(&partition.text(), noisy_output, &partition.texts(), judge, cfg.attributor_retries)?
            }
        };
        scores.insert(kind.name().to_string(), noise_score(&attribution, inst.noise_index)?);
    }
    Ok(scores)
}

fn evaluate_one(
    doc: &InputDocument,
    inst: &NoisyInstance,
    model: &dyn ModelProvider,
    judge: Option<&dyn ModelProvider>,
    cfg: &EvaluateConfig,
) -> Result<EvaluationRecord, Error> {
    inst.validate()?;
    let partition = inst.partition();
    let original_output = model.generate(&doc.text)?.text;
    let noisy_output = model.generate(&partition.text())?.text;
    let retained = filter_unchanged(&original_output, &noisy_output);
    let mut record = EvaluationRecord {
        instance_id: inst.instance_id.clone(),
        task: doc.task,
        mode: inst.mode,
        noisy_partition: partition,
        noise_index: inst.noise_index,
        original_output,
        noisy_output,
        retained,
        noise_scores: BTreeMap::new(),
        skipped: None,
    };
    if !retained {
        return Ok(record);
    }
    if cfg.mode == Mode::Exact && record.noisy_partition.len() > cfg.exact_cap {
        record.skipped = Some(format!(
            "{} features exceed the exact-mode cap of {}",
            record.noisy_partition.len(),
            cfg.exact_cap
        ));
        return Ok(record);
    }
    match scores_for(doc, inst, &record.noisy_partition, &record.noisy_output, model, judge, cfg) {
        Ok(scores) => record.noise_scores = scores,
        Err(e) => {
            warn!("{}: dropped from the paired comparison: {e}", inst.instance_id);
            record.skipped = Some(e.to_string());
        }
    }
    Ok(record)
}

/// Runs every noisy instance. Instances are processed in parallel and
/// returned in input order. An instance whose model calls fail is recorded
/// as skipped; a noisy instance with no matching document is an error.
pub fn evaluate(
    docs: &[InputDocument],
    noisy: &[NoisyInstance],
    model: &dyn ModelProvider,
    judge: Option<&dyn ModelProvider>,
    cfg: &EvaluateConfig,
) -> Result<Vec<EvaluationRecord>, Error> {
    let by_id: HashMap<&str, &InputDocument> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let pairs: Vec<(&InputDocument, &NoisyInstance)> = noisy
        .iter()
        .map(|n| {
            by_id
                .get(n.instance_id.as_str())
                .map(|d| (*d, n))
                .ok_or_else(|| Error::Validation(format!("noisy instance `{}` is not in the dataset", n.instance_id)))
        })
        .collect::<Result<_, _>>()?;
    let records: Vec<EvaluationRecord> = pairs
        .par_iter()
        .map(|(doc, inst)| {
            evaluate_one(doc, inst, model, judge, cfg).or_else(|e| match e {
                Error::Provider(_) | Error::Comparator(_) => {
                    warn!("{}: {e}", inst.instance_id);
                    Ok(EvaluationRecord {
                        instance_id: inst.instance_id.clone(),
                        task: doc.task,
                        mode: inst.mode,
                        noisy_partition: inst.partition(),
                        noise_index: inst.noise_index,
                        original_output: String::new(),
                        noisy_output: String::new(),
                        retained: false,
                        noise_scores: BTreeMap::new(),
                        skipped: Some(e.to_string()),
                    })
                }
                other => Err(other),
            })
        })
        .collect::<Result<_, _>>()?;
    let scored = records.iter().filter(|r| r.is_scored()).count();
    info!("{} instances, {} retained and scored", records.len(), scored);
    Ok(records)
}

/// Rows of the paired design: retained instances scored by every attributor.
pub fn score_rows(records: &[EvaluationRecord], model_id: &str) -> Vec<ScoreRow> {
    records
        .iter()
        .filter(|r| r.is_scored())
        .map(|r| ScoreRow {
            task: r.task,
            model: model_id.to_string(),
            instance_id: r.instance_id.clone(),
            mode: r.mode,
            n_features: r.noisy_partition.len(),
            scores: r.noise_scores.clone(),
        })
        .collect()
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";

/// Writes `records.jsonl` and `scores.jsonl` into `dir`.
pub fn write_evaluation(dir: &Path, records: &[EvaluationRecord], model_id: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    write_jsonl(&dir.join(RECORDS_FILE), records)?;
    write_jsonl(&dir.join(SCORES_FILE), &score_rows(records, model_id))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Error> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
