use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the engagement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value outside the domain of {op}: {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("degenerate evidence: probability of the observation is {mass:e}; beliefs must be widened")]
    DegenerateEvidence { mass: f64 },

    #[error("event has {0} topics; exact enumeration supports at most {max}", max = crate::models::MAX_ENUMERATED_TOPICS)]
    EnumerationBound(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no annotation for lecture {lecture_id} fragment {fragment_index}")]
    MissingAnnotation { lecture_id: String, fragment_index: usize },

    #[error("duplicate log record: {0}")]
    DuplicateLog(String),

    #[error("ordering violation for learner {learner_id}: expected order {expected}, found {found}")]
    Ordering { learner_id: String, expected: u64, found: u64 },

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("learner {learner_id}, order {order}: {source}")]
    AtEvent {
        learner_id: String,
        order: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("input of {len} characters exceeds the service limit of {limit}")]
    OverLength { len: usize, limit: usize },

    #[error("annotation service unreachable: {0}")]
    ServiceUnreachable(String),

    #[error("annotation service rejected the request: {0}")]
    ServiceRejected(String),

    #[error("malformed service response: {0}")]
    MalformedResponse(String),

    #[error("missing API key: set the {0} environment variable")]
    MissingApiKey(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    pub(crate) fn at_event(self, learner_id: &str, order: u64) -> Self {
        Error::AtEvent { learner_id: learner_id.to_string(), order, source: Box::new(self) }
    }

    /// Whether retrying the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::ServiceUnreachable(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
