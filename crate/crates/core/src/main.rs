use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use featattr::client::{CachedProvider, MockProvider, MockScript, ModelProvider, ProviderConfig, RemoteProvider, ResponseCache};
use featattr::comparators::{Comparator, ComparatorKind, RemoteEmbedder};
use featattr::error::Error;
use featattr::grammar::Language;
use featattr::harness::{
    self, default_splitter, AttributorKind, EvaluateConfig, InjectConfig, InjectionMode, NoisePool, NoisyInstance,
    ScoreRow,
};
use featattr::model::{load_dataset, InputDocument, Mode, Task};
use featattr::pipeline::{attribute, AttributionConfig};
use featattr::report::{emit_html, emit_json};
use featattr::sampler::DEFAULT_EXACT_CAP;
use featattr::splitters::SplitterConfig;
use featattr::stats::{build_results, write_results};

#[derive(Parser)]
#[command(name = "featattr", version, about = "Feature-level Shapley attribution for code models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute one model output to the features of one input.
    Attribute(AttributeArgs),
    /// Inject one noise feature into every instance of a dataset.
    Inject(InjectArgs),
    /// Run the noise evaluation over injected instances.
    Evaluate(EvaluateArgs),
    /// Summarize and compare per-instance noise scores.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Codegen,
    Codesum,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Codegen => Task::CodeGeneration,
            TaskArg::Codesum => Task::CodeSummarization,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitterArg {
    Code,
    NlLlm,
    NlRule,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectSplitterArg {
    Auto,
    Code,
    NlLlm,
    NlRule,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComparatorArg {
    Exact,
    Tfidf,
    Codebleu,
    EmbedF1,
}

impl From<ComparatorArg> for ComparatorKind {
    fn from(c: ComparatorArg) -> Self {
        match c {
            ComparatorArg::Exact => ComparatorKind::Exact,
            ComparatorArg::Tfidf => ComparatorKind::Tfidf,
            ComparatorArg::Codebleu => ComparatorKind::Codebleu,
            ComparatorArg::EmbedF1 => ComparatorKind::EmbedF1,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Mc => Mode::MonteCarlo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectModeArg {
    Nonsensical,
    CrossSample,
}

impl From<InjectModeArg> for InjectionMode {
    fn from(m: InjectModeArg) -> Self {
        match m {
            InjectModeArg::Nonsensical => InjectionMode::Nonsensical,
            InjectModeArg::CrossSample => InjectionMode::CrossSample,
        }
    }
}

/// Where model calls go: a chat-completions endpoint or a scripted mock.
#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    /// JSON mock script; replaces the endpoint.
    #[arg(long)]
    mock: Option<PathBuf>,
}

#[derive(Args)]
struct AttributeArgs {
    /// Text file holding the input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "nl-rule")]
    splitter: SplitterArg,
    #[arg(long, value_enum, default_value = "tfidf")]
    comparator: ComparatorArg,
    #[arg(long, value_enum, default_value = "mc")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    sampling_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    html: Option<PathBuf>,
    /// Source language (python or java); defaults from the file extension.
    #[arg(long)]
    language: Option<String>,
    /// Model used by the nl-llm splitter; defaults to --model.
    #[arg(long)]
    splitter_model: Option<String>,
    /// Token-embedding endpoint for embed-f1; the hashed embedder otherwise.
    #[arg(long)]
    embed_endpoint: Option<String>,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
    /// Concurrent model calls.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: InjectModeArg,
    /// Nonsense sentences, one per line; the shipped pool otherwise.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// `auto` splits prose prompts by rule and code structurally.
    #[arg(long, value_enum, default_value = "auto")]
    splitter: InjectSplitterArg,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    noisy: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated: shapley, random, llm.
    #[arg(long, default_value = "shapley,random")]
    attributors: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    sampling_ratio: f64,
    /// Overrides codebleu for generation and embed-f1 for summarization.
    #[arg(long, value_enum)]
    comparator: Option<ComparatorArg>,
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
    /// Model for the llm attributor.
    #[arg(long)]
    judge_model: Option<String>,
    /// Endpoint for the llm attributor; defaults to --endpoint.
    #[arg(long)]
    judge_endpoint: Option<String>,
    #[arg(long)]
    judge_mock: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory written by `evaluate`, or a scores.jsonl file.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Attributor the others are compared against.
    #[arg(long, default_value = "shapley")]
    reference: String,
}

fn provider_from(
    model: Option<&str>,
    endpoint: Option<&str>,
    mock: Option<&Path>,
    role: &str,
) -> Result<Arc<dyn ModelProvider>, Error> {
    let model_id = model.unwrap_or("mock");
    if let Some(script) = mock {
        let script = MockScript::from_file(script).map_err(|e| Error::Validation(e.to_string()))?;
        return Ok(Arc::new(MockProvider::new(model_id, script)));
    }
    let endpoint = endpoint.ok_or_else(|| Error::Validation(format!("{role}: give --endpoint or a mock script")))?;
    let model_id = model.ok_or_else(|| Error::Validation(format!("{role}: --model is required with an endpoint")))?;
    let cfg = ProviderConfig::new(endpoint, model_id);
    let cache = match &cfg.cache_dir {
        Some(dir) => ResponseCache::on_disk(dir.clone()),
        None => ResponseCache::in_memory(),
    };
    let remote = RemoteProvider::new(cfg)?;
    Ok(Arc::new(CachedProvider::new(remote, Arc::new(cache))))
}

fn model_provider(args: &ModelArgs, role: &str) -> Result<Arc<dyn ModelProvider>, Error> {
    provider_from(args.model.as_deref(), args.endpoint.as_deref(), args.mock.as_deref(), role)
}

fn language_of(path: &Path, explicit: Option<&str>) -> Option<String> {
    explicit.map(str::to_string).or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("java") => Some("java".into()),
        Some("py") => Some("python".into()),
        _ => None,
    })
}

fn run_attribute(a: AttributeArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&a.input)?;
    let id = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let mut doc = InputDocument::new(id, a.task.into(), text);
    doc.language_hint = language_of(&a.input, a.language.as_deref());
    let language = Language::from_hint(doc.language_hint.as_deref())?;

    let model = model_provider(&a.model, "model")?;
    let splitter = match a.splitter {
        SplitterArg::Code => SplitterConfig::code(),
        SplitterArg::NlRule => SplitterConfig::nl_rule(),
        SplitterArg::NlLlm => SplitterConfig::nl_llm(
            a.splitter_model.clone().unwrap_or_else(|| model.model_id().to_string()),
        ),
    };
    let splitter_client: Option<Arc<dyn ModelProvider>> = match (a.splitter, &a.splitter_model) {
        (SplitterArg::NlLlm, Some(id)) => Some(provider_from(
            Some(id),
            a.model.endpoint.as_deref(),
            a.model.mock.as_deref(),
            "splitter",
        )?),
        (SplitterArg::NlLlm, None) => Some(model.clone()),
        _ => None,
    };

    let mut comparator = Comparator::of_kind(a.comparator.into()).with_language(language);
    if let Some(url) = &a.embed_endpoint {
        comparator = comparator.with_embedder(Arc::new(RemoteEmbedder::new(url.as_str())?));
    }
    let mut cfg = AttributionConfig {
        mode: a.mode.into(),
        sampling_ratio: a.sampling_ratio,
        seed: a.seed,
        exact_cap: a.exact_cap,
        ..AttributionConfig::default()
    };
    if let Some(p) = a.parallelism {
        cfg.parallelism = p.max(1);
    }
    let result = attribute(&doc, model.as_ref(), &splitter, splitter_client.as_deref(), &comparator, &cfg)?;
    emit_json(&result, &a.out)?;
    if let Some(html) = &a.html {
        emit_html(&result, &result.output_text, html)?;
    }
    info!(
        "{} features, {} coalitions, written to {}",
        result.partition.len(),
        result.coalition_count,
        a.out.display()
    );
    Ok(())
}

fn run_inject(a: InjectArgs) -> Result<(), Error> {
    let docs = load_dataset(&a.dataset)?;
    let pool = match &a.pool {
        Some(p) => NoisePool::from_file(p)?,
        None => NoisePool::default(),
    };
    let needs_llm = matches!(a.splitter, InjectSplitterArg::NlLlm);
    let client = if needs_llm { Some(model_provider(&a.model, "splitter")?) } else { None };
    let llm_id = client.as_ref().map(|c| c.model_id().to_string()).unwrap_or_default();
    let choice = a.splitter;
    let splitter_for = move |d: &InputDocument| match choice {
        InjectSplitterArg::Auto => default_splitter(d.task),
        InjectSplitterArg::Code => SplitterConfig::code(),
        InjectSplitterArg::NlRule => SplitterConfig::nl_rule(),
        InjectSplitterArg::NlLlm => SplitterConfig::nl_llm(llm_id.clone()),
    };
    let cfg = InjectConfig {
        mode: a.mode.into(),
        seed: a.seed,
        pool,
    };
    let run = harness::inject_dataset(&docs, splitter_for, client.as_deref(), &cfg)?;
    for (id, why) in &run.skipped {
        warn!("skipped {id}: {why}");
    }
    harness::write_jsonl(&a.out, &run.instances)?;
    info!("{} noisy instances written, {} skipped", run.instances.len(), run.skipped.len());
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let docs = load_dataset(&a.dataset)?;
    let noisy: Vec<NoisyInstance> = harness::read_jsonl(&a.noisy)?;
    let attributors = AttributorKind::parse_list(&a.attributors).map_err(Error::Validation)?;
    let model = model_provider(&a.model, "model")?;
    let judge = if attributors.contains(&AttributorKind::Llm) {
        Some(provider_from(
            a.judge_model.as_deref(),
            a.judge_endpoint.as_deref().or(a.model.endpoint.as_deref()),
            a.judge_mock.as_deref(),
            "judge",
        )?)
    } else {
        None
    };
    let cfg = EvaluateConfig {
        attributors,
        mode: a.mode.into(),
        sampling_ratio: a.sampling_ratio,
        exact_cap: a.exact_cap,
        comparator: a.comparator.map(Into::into),
        ..EvaluateConfig::default()
    };
    let records = harness::evaluate(&docs, &noisy, model.as_ref(), judge.as_deref(), &cfg)?;
    harness::write_evaluation(&a.out, &records, model.model_id())?;
    Ok(())
}

fn run_stats(a: StatsArgs) -> Result<(), Error> {
    let path = if a.scores.is_dir() {
        a.scores.join(harness::SCORES_FILE)
    } else {
        a.scores.clone()
    };
    let rows: Vec<ScoreRow> = harness::read_jsonl(&path)?;
    if rows.is_empty() {
        return Err(Error::Validation(format!("{} holds no scored instances", path.display())));
    }
    let table = build_results(&rows, &a.reference)?;
    write_results(&table, &a.out)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Attribute(a) => run_attribute(a),
        Command::Inject(a) => run_inject(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Stats(a) => run_stats(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
