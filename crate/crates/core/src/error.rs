use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("value for `{name}` is outside its domain: {value}")]
    OutOfDomain { name: String, value: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Every optimizer start failed; `best` holds the best parameters seen, if any.
    #[error("{family} fit did not converge")]
    FitFailed { family: String, best: Option<Vec<f64>> },

    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("correlation is undefined for a constant list")]
    UndefinedCorrelation,

    #[error("sweep has no full-fidelity (r = 1) evaluations")]
    MissingFullFidelity,

    #[error("no observations: {0}")]
    NoObservations(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("unknown suggestion `{0}`")]
    UnknownSuggestion(String),

    #[error("suggestion `{0}` was already reported")]
    DuplicateReport(String),

    #[error("suggestion `{0}` was never served")]
    NotServed(String),

    #[error("budget exhausted")]
    BudgetExhausted,

    #[error("invalid patch: {0}")]
    InvalidPatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid_param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
