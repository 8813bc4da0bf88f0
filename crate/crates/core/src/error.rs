use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a type invariant or operation precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Utilization is undefined for a kernel without memory traffic.
    #[error("kernel has no memory traffic (T_L3Mem = 0): scaling is linear, utilization undefined")]
    NoMemoryTraffic,

    #[error("{what} = {value} GHz is outside the supported interval [{min}, {max}] GHz")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("bandwidth lookup at f_core = {f_core} GHz, f_uncore = {f_uncore} GHz is outside the table: {detail}")]
    Extrapolation {
        f_core: f64,
        f_uncore: f64,
        detail: String,
    },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("insufficient data: {reason}; excluded: [{}]", excluded.join("; "))]
    InsufficientData {
        reason: String,
        excluded: Vec<String>,
    },

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    /// An analytic shortcut does not apply; the grid optimizer or a different
    /// data set is needed.
    #[error("analytic failure: {0}")]
    AnalyticFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{} invalid row(s):\n  {}", diagnostics.len(), diagnostics.join("\n  "))]
    Validation { diagnostics: Vec<String> },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("model file integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
