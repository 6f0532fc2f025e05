//! Max-activating text snippets with per-token activations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub const MAX_SNIPPETS: usize = 20;
pub const MAX_SNIPPET_TOKENS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnippetError {
    #[error("text {record}: {tokens} tokens but {activations} activations")]
    LengthMismatch {
        record: usize,
        tokens: usize,
        activations: usize,
    },
    #[error("text {record}: length {len} outside 1..={MAX_SNIPPET_TOKENS}")]
    BadSequenceLength { record: usize, len: usize },
    #[error("{0} texts, at most {MAX_SNIPPETS} allowed")]
    TooManySnippets(usize),
    #[error("text {record} has a larger max activation than the text before it")]
    NotSorted { record: usize },
    #[error("text {record}: declared max {declared} at index {index} does not match the activations")]
    MaxMismatch {
        record: usize,
        declared: String,
        index: usize,
    },
    #[error("text {record}: non-finite activation at index {index}")]
    NonFiniteActivation { record: usize, index: usize },
    #[error("neuron has no snippets")]
    NoSnippets,
    #[error("malformed snippet payload: {0}")]
    Malformed(String),
}

/// One max-activating sequence. Rank among the neuron's texts is its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SnippetRecord<F> {
    pub tokens: Vec<String>,
    pub activations: Vec<F>,
    pub max_activation: F,
    pub max_index: usize,
}

impl<F: Scalar> SnippetRecord<F> {
    /// Builds a record, deriving the maximum from the activations.
    /// Returns `None` for empty input or mismatched lengths.
    pub fn from_activations(tokens: Vec<String>, activations: Vec<F>) -> Option<Self> {
        if tokens.len() != activations.len() || tokens.is_empty() {
            return None;
        }
        let (max_index, max_activation) = argmax(&activations)?;
        Some(SnippetRecord {
            tokens,
            activations,
            max_activation,
            max_index,
        })
    }

    fn check(&self, record: usize) -> Result<(), SnippetError> {
        if self.tokens.len() != self.activations.len() {
            return Err(SnippetError::LengthMismatch {
                record,
                tokens: self.tokens.len(),
                activations: self.activations.len(),
            });
        }
        let len = self.tokens.len();
        if len == 0 || len > MAX_SNIPPET_TOKENS {
            return Err(SnippetError::BadSequenceLength { record, len });
        }
        if let Some(index) = self.activations.iter().position(|a| !a.is_finite()) {
            return Err(SnippetError::NonFiniteActivation { record, index });
        }
        let mismatch = || SnippetError::MaxMismatch {
            record,
            declared: self.max_activation.to_string(),
            index: self.max_index,
        };
        let (_, max) = argmax(&self.activations).ok_or_else(mismatch)?;
        match self.activations.get(self.max_index) {
            Some(&at) if at == max && self.max_activation == max => Ok(()),
            _ => Err(mismatch()),
        }
    }
}

/// First index of the largest value.
fn argmax<F: Scalar>(values: &[F]) -> Option<(usize, F)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

/// All stored texts of one neuron, sorted by max activation, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NeuronSnippets<F> {
    pub texts: Vec<SnippetRecord<F>>,
}

impl<F: Scalar> NeuronSnippets<F> {
    /// Position of `texts[i]` among the neuron's top snippets.
    pub fn source_rank(&self, i: usize) -> Option<usize> {
        (i < self.texts.len()).then_some(i)
    }

    pub fn is_complete(&self) -> bool {
        self.texts.len() == MAX_SNIPPETS
    }
}

pub fn validate_snippets<F: Scalar>(raw: NeuronSnippets<F>) -> Result<NeuronSnippets<F>, SnippetError> {
    if raw.texts.len() > MAX_SNIPPETS {
        return Err(SnippetError::TooManySnippets(raw.texts.len()));
    }
    for (i, record) in raw.texts.iter().enumerate() {
        record.check(i)?;
    }
    if let Some(i) = raw
        .texts
        .windows(2)
        .position(|w| w[0].max_activation < w[1].max_activation)
    {
        return Err(SnippetError::NotSorted { record: i + 1 });
    }
    Ok(raw)
}

pub fn parse_snippets<F: Scalar>(bytes: &[u8]) -> Result<NeuronSnippets<F>, SnippetError> {
    let raw = serde_json::from_slice(bytes).map_err(|e| SnippetError::Malformed(e.to_string()))?;
    validate_snippets(raw)
}

/// Smallest and largest activation over every text.
pub fn activation_extremes<F: Scalar>(snips: &NeuronSnippets<F>) -> Result<(F, F), SnippetError> {
    let mut values = snips.texts.iter().flat_map(|t| t.activations.iter().copied());
    let first = values.next().ok_or(SnippetError::NoSnippets)?;
    Ok(values.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}
