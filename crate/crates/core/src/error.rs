use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("duplicate annotation for record `{record_id}` by `{annotator_id}`")]
    DuplicateAnnotation {
        record_id: String,
        annotator_id: String,
    },

    #[error("line {line}: invariant violated: {message}")]
    Invariant { line: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("unknown uncertainty method `{0}`")]
    UnknownMethod(String),

    #[error("record `{record_id}` has no external score `{metric}`")]
    MissingMetric { metric: String, record_id: String },

    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),

    #[error("judge transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("cannot parse judge verdict from reply {reply:?}")]
    VerdictParse { reply: String },

    #[error("estimator `{method}` unavailable: {reason}")]
    UnavailableEstimator { method: String, reason: String },

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("AUROC undefined: single-class labels")]
    SingleClass,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion rates undefined: estimated labels contain a single class")]
    UndefinedRates,

    #[error("infeasible error-rate targets: {0}")]
    Calibration(String),

    #[error("records and annotations share no ids")]
    EmptyJoin,

    #[error("metric `{0}` is binary and cannot be swept over thresholds")]
    NotSweepable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
