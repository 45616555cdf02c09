use thiserror::Error;

/// Failures while reading a bundle file.
#[derive(Debug, Error)]
pub enum BundleError {
    #[error("line {line}: malformed bundle: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unsupported format_version {found} (expected 1)")]
    Version { line: usize, found: u64 },
    #[error("line {line}: dangling reference: {reference}")]
    Integrity { line: usize, reference: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures raised by the scoring pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("degenerate top-k distribution at sentence {sentence}, token {token}: max + variance is zero")]
    DegenerateTopk { sentence: usize, token: usize },
    #[error("missing NLI score for ordered pair (premise {premise}, hypothesis {hypothesis})")]
    MissingNli { premise: usize, hypothesis: usize },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Failures raised by the evaluation metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not one of 0, 0.5, 1")]
    InvalidLabel(f64),
    #[error("no labeled passages in the input")]
    Unlabeled,
    #[error("reports and bundles disagree: {0}")]
    Mismatch(String),
}
