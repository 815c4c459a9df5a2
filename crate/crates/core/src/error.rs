use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HmmError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("emission/sequence type mismatch: model is {model}, sequence is {sequence}")]
    TypeMismatch {
        model: &'static str,
        sequence: &'static str,
    },
    #[error("empty sequence")]
    EmptySequence,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sequence has zero probability under the model (first impossible step {step})")]
    ImpossibleSequence { step: usize },
    #[error("instance too large for enumeration: {paths} paths exceeds {limit}")]
    InstanceTooLarge { paths: f64, limit: u64 },
    #[error("empty training set{}", label.as_ref().map(|l| format!(" for class '{l}'")).unwrap_or_default())]
    EmptyTrainingSet { label: Option<String> },
    #[error("sequence too short: length {len}, need at least {min}")]
    SequenceTooShort { len: usize, min: usize },
    #[error("state {state} has zero posterior occupancy")]
    StateStarved { state: usize },
    #[error("DegenerateVariance: series has zero variance")]
    DegenerateVariance,
    #[error("window length {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("duplicate label '{0}'")]
    DuplicateLabel(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("sequence is impossible under every model in the bank")]
    Unclassifiable,
    #[error("test sequences have mixed lengths ({first} and {other})")]
    MixedLengths { first: usize, other: usize },
}

pub type Result<T> = std::result::Result<T, HmmError>;
