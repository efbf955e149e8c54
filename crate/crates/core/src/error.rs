use thiserror::Error;

/// Errors raised by the inference engine and its data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pair: ward {0} cannot be compared with itself")]
    InvalidPair(usize),

    #[error("ward index {index} out of range for {n_wards} wards")]
    WardOutOfRange { index: usize, n_wards: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset contains {0} tied comparisons; use the tie-model likelihood")]
    TiesPresent(u64),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("unknown ward label `{0}`")]
    UnknownWard(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sampler failed at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("gave up after {0} degenerate draws")]
    Degenerate(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
