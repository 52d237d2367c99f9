use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-canonical label {label} at position {position} (max so far {max})")]
    NonCanonicalLabel {
        position: usize,
        label: usize,
        max: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("length mismatch: {embeddings} embeddings but {labels} labels")]
    LengthMismatch { embeddings: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("change indicators inconsistent with labels")]
    InconsistentIndicators,
    #[error("p0 undefined: every utterance has length 1")]
    P0Undefined,
    #[error("non-finite gradient for utterance {utterance}")]
    NonFiniteGradient { utterance: String },
    #[error("oracle guard: exhaustive search limited to T <= {max}, got {got}")]
    OracleGuard { max: usize, got: usize },
    #[error("nothing to score")]
    NothingToScore,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
