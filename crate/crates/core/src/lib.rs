//! Storage, indexing and scoring for per-neuron interpretability data.
//!
//! Three kinds of record are kept per MLP neuron: token activation graphs
//! ([`n2g`]), max-activating text snippets ([`neuroscope`]) and natural
//! language explanations ([`explainer`]). They are ingested into a single
//! file ([`store`]) together with an inverted token index ([`search`]) and
//! precomputed similar-neuron lists.
//!
//! Numeric payloads are generic over [`Scalar`]; the aliases at the crate
//! root fix the scalar to `f64`, which is what the store and server use.

pub mod domain;
pub mod explainer;
pub mod fixture;
pub mod layout;
pub mod n2g;
pub mod neuroscope;
pub mod scalar;
pub mod search;
pub mod store;
mod vocabulary;

pub use domain::{ModelMetadata, NeuronPath, PathError, ServiceKind, ServiceSet};
pub use scalar::Scalar;

pub type Graph = n2g::N2GGraph<f64>;
pub type Node = n2g::N2GNode<f64>;
pub type Similarity = n2g::SimilarityScore<f64>;
pub type Snippet = neuroscope::SnippetRecord<f64>;
pub type Snippets = neuroscope::NeuronSnippets<f64>;
pub type Explanation = explainer::ExplanationRecord<f64>;
pub type NeuronMetadata = domain::NeuronMetadata<f64>;

pub type Graph32 = n2g::N2GGraph<f32>;
pub type Snippets32 = neuroscope::NeuronSnippets<f32>;
