//! Error types shared across the toolkit.

use thiserror::Error;

/// Errors raised while parsing, analyzing, or rewriting a single snippet.
#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("sample {id}: no well-formed function definition")]
    ParseError { id: String },
    #[error("`{name}` is not a valid {language} identifier")]
    InvalidIdentifier { name: String, language: String },
    #[error("renaming to `{name}` would collide with an existing variable")]
    CollisionError { name: String },
}

/// Errors from fitting or applying the suitability projection.
#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("corpus has {n} parseable samples; at least 2 are required")]
    DegenerateCorpus { n: usize },
    #[error("eigensolver residual {residual:e} above tolerance after {iterations} iterations")]
    ConvergenceError { residual: f64, iterations: usize },
    #[error("labels reference unknown sample ids: {0:?}")]
    UnknownIds(Vec<String>),
    #[error("quantile threshold must satisfy 0 <= tau < 1, got {0}")]
    InvalidTau(f64),
}

/// Errors from validation-set construction and model querying.
#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("only {available} usable watermarked records; {requested} requested")]
    InsufficientCarriers { available: usize, requested: usize },
    #[error("model endpoint unreachable: {0}")]
    ModelUnreachable(String),
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
    #[error("verification needs at least one validation pair")]
    EmptyValidationSet,
    #[error("run aborted after {completed} queries: {cause}")]
    AbortedRun { completed: usize, cause: String },
    #[error("unsupported model uri: {0}")]
    BadModelUri(String),
    #[error("journal io: {0}")]
    Journal(#[from] std::io::Error),
}

/// Errors from corpus ingestion.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}
