use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular principal minor for subset {subset:?} (log det = {log_det})")]
    SingularMinor { subset: Vec<usize>, log_det: f64 },

    #[error("k = {k} exceeds available items ({available})")]
    KTooLarge { k: usize, available: usize },

    #[error("combinatorial budget exceeded: C({n}, {k}) > {budget}")]
    BudgetExceeded { n: usize, k: usize, budget: u64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("unknown ids: {}", .0.join(", "))]
    UnknownIds(Vec<String>),

    #[error("query {query_id}: {source}")]
    Query {
        query_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image encoding: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by user configuration rather than runtime state.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidInput(_) | Error::KTooLarge { .. }
        )
    }
}
