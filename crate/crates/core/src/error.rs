use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("line {line}: label {value:?} is not one of -1, 0, +1")]
    Label { line: usize, value: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("privacy precondition violated: {0}")]
    Precondition(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("margin oracle did not converge; margin lies in [{lower}, {upper}]")]
    Oracle { lower: f64, upper: f64 },

    #[error("exhaustive oracle supports at most {cap} points, got {n}")]
    Size { n: usize, cap: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("missing context: {0}")]
    MissingContext(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("candidate {index} failed: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by `--json-errors` and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Dimension { .. } => "dimension",
            Error::Label { .. } => "label",
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::Generation(_) => "generation",
            Error::Oracle { .. } => "oracle",
            Error::Size { .. } => "size",
            Error::Resource(_) => "resource",
            Error::MissingContext(_) => "missing_context",
            Error::Unsupported(_) => "unsupported",
            Error::Candidate { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for argument and precondition failures (exit code 2 on the CLI).
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Precondition(_) => true,
            Error::Candidate { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
