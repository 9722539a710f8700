use thiserror::Error;

/// Violations of the data-model contracts (bad indices, malformed spans).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("coalition mask {mask:#x} addresses features beyond {n_features}")]
    CoalitionOutOfRange { mask: u64, n_features: usize },
    #[error("invalid feature spans: {0}")]
    BadSpans(String),
    #[error("document {0} has empty text")]
    EmptyDocument(String),
    #[error("duplicate document id {0}")]
    DuplicateId(String),
    #[error("index {index} out of range for {len} features")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid attribution: {0}")]
    BadAttribution(String),
    #[error("partition is not lossless with respect to its source")]
    NotLossless,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("input text is empty")]
    Empty,
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("splitter misconfigured: {0}")]
    Config(String),
    #[error("segments do not reproduce the input byte-exactly")]
    NotLossless,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("exact mode is capped at {cap} features, got {n}")]
    ExactModeCap { n: usize, cap: usize },
    #[error("{n} features exceed the supported maximum of {max}")]
    TooManyFeatures { n: usize, max: usize },
    #[error("sampling ratio {0} is outside [0, 1]")]
    InvalidRatio(f64),
    #[error("a partition needs at least one feature")]
    NoFeatures,
    #[error("sampling plan would hold {0} coalitions")]
    PlanTooLarge(u128),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapleyError {
    #[error("value table is missing coalition {0:#x}")]
    IncompleteTable(u64),
    #[error("feature {0} has no sampled coalition on one side")]
    PlanInvariantViolated(usize),
    #[error("comparator is not reflexive: s(o, o) = {0}")]
    NotReflexive(f64),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ProviderError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ComparatorError {
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("comparator misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InjectionError {
    #[error("no length-compatible noise candidate")]
    NoCandidate,
}

#[derive(Debug, Error)]
pub enum AttributorError {
    #[error("attributor response rejected after {attempts} attempts: {reason}")]
    Rejected { attempts: usize, reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("all paired differences are zero")]
    DegenerateTest,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid report: {0}")]
    Invalid(String),
}

/// Top-level error for pipelines that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Comparator(#[from] ComparatorError),
    #[error(transparent)]
    Injection(#[from] InjectionError),
    #[error(transparent)]
    Attributor(#[from] AttributorError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("validation: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 3 for provider failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Provider(_) | Error::Attributor(AttributorError::Provider(_)) => 3,
            Error::Comparator(ComparatorError::Provider(_)) => 3,
            _ => 2,
        }
    }
}
