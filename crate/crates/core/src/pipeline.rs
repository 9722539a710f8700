//! End-to-end attribution of one input: split, plan coalitions, query the
//! model on every perturbed input, score against the original output, and
//! compute Shapley values.

use std::collections::HashMap;

use log::debug;
use rayon::prelude::*;

use crate::client::ModelProvider;
use crate::comparators::Comparator;
use crate::error::{Error, SampleError, ShapleyError};
use crate::model::{assemble, AttributionResult, Coalition, FeaturePartition, InputDocument, Mode, Task, MAX_FEATURES};
use crate::sampler::{enumerate_exact, sample_mc, SamplingPlan, DEFAULT_EXACT_CAP};
use crate::shapley::{exact_shapley_capped, mc_shapley, normalize, ValueTable};
use crate::splitters::{split, SplitterConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionConfig {
    pub mode: Mode,
    pub sampling_ratio: f64,
    pub seed: u64,
    pub exact_cap: usize,
    /// Concurrent model calls per input.
    pub parallelism: usize,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::MonteCarlo,
            sampling_ratio: 0.0,
            seed: 0,
            exact_cap: DEFAULT_EXACT_CAP,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl AttributionConfig {
    pub fn exact() -> Self {
        Self {
            mode: Mode::Exact,
            sampling_ratio: 1.0,
            ..Self::default()
        }
    }

    pub fn monte_carlo(ratio: f64, seed: u64) -> Self {
        Self {
            mode: Mode::MonteCarlo,
            sampling_ratio: ratio,
            seed,
            ..Self::default()
        }
    }

    pub fn plan(&self, n: usize) -> Result<SamplingPlan, SampleError> {
        match self.mode {
            Mode::Exact => enumerate_exact(n, self.exact_cap),
            Mode::MonteCarlo => sample_mc(n, self.sampling_ratio, self.seed),
        }
    }
}

/// Splits `doc` and attributes the model's output to the resulting features.
pub fn attribute(
    doc: &InputDocument,
    model: &dyn ModelProvider,
    splitter: &SplitterConfig,
    splitter_client: Option<&dyn ModelProvider>,
    comparator: &Comparator,
    cfg: &AttributionConfig,
) -> Result<AttributionResult, Error> {
    doc.validate()?;
    let partition = split(doc, splitter, splitter_client)?;
    attribute_partition(doc.task, &partition, model, comparator, cfg)
}

/// Attribution over an existing partition; the model input is the
/// partition's concatenated text.
pub fn attribute_partition(
    task: Task,
    partition: &FeaturePartition,
    model: &dyn ModelProvider,
    comparator: &Comparator,
    cfg: &AttributionConfig,
) -> Result<AttributionResult, Error> {
    partition.validate()?;
    let n = partition.len();
    if n > MAX_FEATURES {
        return Err(SampleError::TooManyFeatures { n, max: MAX_FEATURES }.into());
    }
    let plan = cfg.plan(n)?;
    let original = model.generate(&partition.text())?;

    let full = Coalition::full(n);
    let perturbed: Vec<Coalition> = plan.coalitions.iter().copied().filter(|c| *c != full).collect();
    let prompts: Vec<String> = perturbed
        .iter()
        .map(|c| assemble(partition, *c))
        .collect::<Result<_, _>>()?;

    // One model call per distinct perturbed prompt.
    let mut unique: Vec<&str> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let prompt_slots: Vec<usize> = prompts
        .iter()
        .map(|p| {
            *slot.entry(p.as_str()).or_insert_with(|| {
                unique.push(p.as_str());
                unique.len() - 1
            })
        })
        .collect();
    debug!(
        "{}: {} coalitions, {} distinct model calls",
        partition.source_id,
        plan.len(),
        unique.len()
    );

    let unique_outputs: Vec<String> = if cfg.parallelism <= 1 || unique.len() < 2 {
        unique
            .iter()
            .map(|p| model.generate(p).map(|o| o.text))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| {
            unique
                .par_iter()
                .map(|p| model.generate(p).map(|o| o.text))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    let outputs: Vec<&str> = prompt_slots.iter().map(|&i| unique_outputs[i].as_str()).collect();

    let v_full = comparator.score(&original.text, &original.text)?;
    if (v_full - 1.0).abs() > 1e-9 {
        return Err(ShapleyError::NotReflexive(v_full).into());
    }
    let scores = comparator.score_batch(&original.text, &outputs)?;

    let mut table = ValueTable::new(n);
    table.insert(full, v_full);
    for (c, v) in perturbed.iter().zip(scores) {
        table.insert(*c, v);
    }

    let raw = match cfg.mode {
        Mode::Exact => exact_shapley_capped(&table, cfg.exact_cap)?,
        Mode::MonteCarlo => mc_shapley(&table, &plan)?,
    };
    let display = normalize(&raw);
    let result = AttributionResult {
        partition: partition.clone(),
        task,
        model_id: model.model_id().to_string(),
        comparator: comparator.name(),
        raw,
        display,
        mode: cfg.mode,
        sampling_ratio: plan.ratio,
        seed: plan.seed,
        coalition_count: plan.len(),
        output_text: original.text,
    };
    result.check_invariants()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::client::{FnProvider, MockOutput, MockProvider, MockRule, MockScript, Predicate};
    use crate::comparators::ComparatorKind;

    fn echo_first_feature(partition: &FeaturePartition) -> MockProvider {
        let f0 = partition.features[0].text.clone();
        let script = MockScript::new(
            vec![MockRule {
                when: Predicate::Contains(f0.clone()),
                output: MockOutput::Text(f0),
            }],
            MockOutput::Text(String::new()),
        )
        .unwrap();
        MockProvider::new("echo0", script)
    }

    #[test]
    fn echo_of_feature_zero_gets_all_attribution() {
        let p = FeaturePartition::from_texts("d", &["alpha. ", "beta. ", "gamma."], "t");
        let model = echo_first_feature(&p);
        let cmp = Comparator::of_kind(ComparatorKind::Exact);
        let r = attribute_partition(Task::CodeGeneration, &p, &model, &cmp, &AttributionConfig::exact()).unwrap();
        assert_eq!(r.display, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.raw, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.coalition_count, 7);
    }

    #[test]
    fn single_feature_makes_only_the_original_call() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let model = FnProvider::new("m", move |msgs| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(msgs[0].content.to_uppercase())
        });
        let doc = InputDocument::new("d", Task::CodeGeneration, "just one sentence");
        let r = attribute(
            &doc,
            &model,
            &SplitterConfig::nl_rule(),
            None,
            &Comparator::of_kind(ComparatorKind::Tfidf),
            &AttributionConfig::exact(),
        )
        .unwrap();
        assert_eq!(r.display, vec![1.0]);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn thirteen_features_exceed_exact_cap() {
        let texts: Vec<String> = (0..13).map(|i| format!("s{i}. ")).collect();
        let p = FeaturePartition::from_texts("d", &texts, "t");
        let model = MockProvider::new("m", MockScript::identity());
        let err = attribute_partition(
            Task::CodeGeneration,
            &p,
            &model,
            &Comparator::of_kind(ComparatorKind::Tfidf),
            &AttributionConfig::exact(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Sample(SampleError::ExactModeCap { n: 13, cap: 12 })));
    }

    #[test]
    fn non_reflexive_comparison_aborts() {
        // Empty original output: tf-idf gives 0 for two empty strings.
        let p = FeaturePartition::from_texts("d", &["a. ", "b."], "t");
        let model = MockProvider::new("m", MockScript::constant(""));
        let err = attribute_partition(
            Task::CodeGeneration,
            &p,
            &model,
            &Comparator::of_kind(ComparatorKind::Tfidf),
            &AttributionConfig::exact(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shapley(ShapleyError::NotReflexive(_))));
    }

    #[test]
    fn provider_errors_fail_the_instance() {
        let model = FnProvider::new("m", |msgs| {
            if msgs[0].content.contains("b.") && msgs[0].content.len() < 5 {
                Err(crate::error::ProviderError::Http { status: 500, message: "boom".into() })
            } else {
                Ok("out".into())
            }
        });
        let p = FeaturePartition::from_texts("d", &["a. ", "b."], "t");
        let err = attribute_partition(
            Task::CodeGeneration,
            &p,
            &model,
            &Comparator::of_kind(ComparatorKind::Exact),
            &AttributionConfig::exact(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let texts: Vec<String> = (0..7).map(|i| format!("kw{i} word{i}. ")).collect();
        let p = FeaturePartition::from_texts("d", &texts, "t");
        let model = MockProvider::new("m", MockScript::extract(r"kw[0-3]").unwrap());
        let cmp = Comparator::of_kind(ComparatorKind::Tfidf);
        let seq = AttributionConfig { parallelism: 1, ..AttributionConfig::exact() };
        let par = AttributionConfig { parallelism: 4, ..AttributionConfig::exact() };
        let a = attribute_partition(Task::CodeGeneration, &p, &model, &cmp, &seq).unwrap();
        let b = attribute_partition(Task::CodeGeneration, &p, &model, &cmp, &par).unwrap();
        assert_eq!(a, b);
        for i in 4..7 {
            assert_eq!(a.raw[i], 0.0);
        }
        let sum: f64 = a.raw.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}
