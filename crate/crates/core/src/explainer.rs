//! Natural-language neuron explanations and their scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplanationError {
    #[error("explanation text is empty")]
    EmptyText,
    #[error("explanation score {0} outside [0, 1]")]
    ScoreOutOfRange(String),
    #[error("malformed explanation payload: {0}")]
    Malformed(String),
}

/// Out-of-range scores are rejected, never clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExplanationRecord<F> {
    pub text: String,
    pub score: F,
}

pub fn validate_explanation<F: Scalar>(raw: ExplanationRecord<F>) -> Result<ExplanationRecord<F>, ExplanationError> {
    if raw.text.trim().is_empty() {
        return Err(ExplanationError::EmptyText);
    }
    if !raw.score.unit_interval_contains() {
        return Err(ExplanationError::ScoreOutOfRange(raw.score.to_string()));
    }
    Ok(raw)
}

pub fn parse_explanation<F: Scalar>(bytes: &[u8]) -> Result<ExplanationRecord<F>, ExplanationError> {
    let raw = serde_json::from_slice(bytes).map_err(|e| ExplanationError::Malformed(e.to_string()))?;
    validate_explanation(raw)
}
