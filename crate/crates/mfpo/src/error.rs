//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Error type covering every pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Image tensor construction or access failed.
    #[error("invalid image: {0}")]
    InvalidImage(String),

    /// Region mask construction failed (e.g. an all-false mask).
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    /// Noise schedule construction failed.
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    /// Diffusion step index outside the schedule.
    #[error("schedule step {t} out of range (schedule length {len})")]
    StepOutOfRange { t: usize, len: usize },

    /// Two tensors that must agree on shape do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// A sample violates a domain invariant.
    #[error("sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },

    /// A dataset or annotation line could not be parsed.
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    /// Keyword extraction removed every token.
    #[error("no candidates after stoplist filtering")]
    NoCandidates,

    /// A response is not in the policy's candidate set.
    #[error("response not in candidate set: \"{0}\"")]
    UnknownCandidate(String),

    /// Image-preference loss requested but the sample has no perturbed image.
    #[error("sample `{id}`: perturbed image missing")]
    MissingPerturbedImage { id: String },

    /// A probability vector does not sum to one.
    #[error("probabilities not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    /// A mask provider failed (distinct from finding no region).
    #[error("mask provider failed for sample `{id}`: {reason}")]
    Provider { id: String, reason: String },

    /// Training produced a non-finite loss.
    #[error("non-finite loss at phase {phase}, epoch {epoch}, step {step}")]
    Divergence {
        phase: String,
        epoch: usize,
        step: usize,
    },

    /// Unknown ablation preset name.
    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    /// Policy checkpoint could not be read or does not fit.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Image byte stream could not be encoded or decoded.
    #[error("image codec: {0}")]
    Codec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code contract for the CLI: 2 for validation errors, 3 for divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
