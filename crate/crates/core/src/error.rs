use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row does not sum to one (sum = {sum}) at {context}")]
    NotARow { sum: f64, context: String },

    #[error("invalid probability {value} at {context}")]
    InvalidProbability { value: f64, context: String },

    #[error("rows disagree on support at {0}")]
    SupportMismatch(String),

    #[error("adversary violated the support of the true row at stage {h}, state {x}, action {a}")]
    AdversarySupportViolation { h: usize, x: usize, a: usize },

    #[error("observed transition has zero likelihood under model {model} at stage {h}")]
    ZeroLikelihood { model: usize, h: usize },

    #[error("reward normalization violated: {0}")]
    RewardRange(String),

    #[error("model set is empty")]
    EmptyModelSet,

    #[error("confidence set became empty at round {0}")]
    EmptyConfidenceSet(usize),

    #[error("every model pair is identical on every stage")]
    AllPairsIdentical,

    #[error("weight iteration did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
