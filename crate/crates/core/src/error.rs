use thiserror::Error;

/// One failed check of a run configuration, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("no bracket for rho: {0}")]
    BracketFailure(String),
    #[error("normalization failed: {0}")]
    NormalizationFailure(String),
    #[error("truncation failed: {0}")]
    TruncationFailure(String),
    #[error("kernel tail bound not met: {0}")]
    TailBoundFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("point outside grid coverage: {0}")]
    OutOfRange(String),
    #[error("at least two points are required, got {0}")]
    TooFewPoints(usize),
    #[error("schema violation: {}", format_violations(.0))]
    SchemaViolation(Vec<Violation>),
    #[error("unsupported format `{0}` for this report")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
