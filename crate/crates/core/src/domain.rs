//! Neuron addressing, model metadata and service availability.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("layer {layer} out of range (model has {num_layers} layers)")]
    LayerOutOfRange { layer: u64, num_layers: u32 },
    #[error("neuron {neuron} out of range (layers have {neurons_per_layer} neurons)")]
    NeuronOutOfRange { neuron: u64, neurons_per_layer: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetadataError {
    #[error("invalid model name {0:?}: expected [a-z0-9-]+")]
    InvalidName(String),
    #[error("model {0} must have at least one layer")]
    NoLayers(String),
    #[error("model {0} must have at least one neuron per layer")]
    NoNeurons(String),
    #[error("`all` cannot be stored as an available service")]
    VirtualService,
}

/// One category of per-neuron data in the URL scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ServiceKind {
    #[serde(rename = "metadata")]
    Metadata,
    #[serde(rename = "neuron2graph")]
    Neuron2Graph,
    #[serde(rename = "neuroscope")]
    Neuroscope,
    #[serde(rename = "neuron-explainer")]
    NeuronExplainer,
    /// Aggregate of the concrete services. Served, never stored.
    #[serde(rename = "all")]
    All,
}

impl ServiceKind {
    pub const CONCRETE: [ServiceKind; 4] = [
        ServiceKind::Metadata,
        ServiceKind::Neuron2Graph,
        ServiceKind::Neuroscope,
        ServiceKind::NeuronExplainer,
    ];

    /// Services backed by ingested record files.
    pub const DATA: [ServiceKind; 3] = [
        ServiceKind::Neuron2Graph,
        ServiceKind::Neuroscope,
        ServiceKind::NeuronExplainer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Metadata => "metadata",
            ServiceKind::Neuron2Graph => "neuron2graph",
            ServiceKind::Neuroscope => "neuroscope",
            ServiceKind::NeuronExplainer => "neuron-explainer",
            ServiceKind::All => "all",
        }
    }

    pub fn is_concrete(self) -> bool {
        self != ServiceKind::All
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown service {0:?}")]
pub struct UnknownService(pub String);

impl FromStr for ServiceKind {
    type Err = UnknownService;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metadata" => Ok(ServiceKind::Metadata),
            "neuron2graph" => Ok(ServiceKind::Neuron2Graph),
            "neuroscope" => Ok(ServiceKind::Neuroscope),
            "neuron-explainer" => Ok(ServiceKind::NeuronExplainer),
            "all" => Ok(ServiceKind::All),
            other => Err(UnknownService(other.to_string())),
        }
    }
}

/// Set of concrete services, serialized as a sorted list of names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceSet(BTreeSet<ServiceKind>);

impl ServiceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, service: ServiceKind) -> Result<bool, MetadataError> {
        if !service.is_concrete() {
            return Err(MetadataError::VirtualService);
        }
        Ok(self.0.insert(service))
    }

    /// `All` is contained iff at least one concrete service is.
    pub fn contains(&self, service: ServiceKind) -> bool {
        match service {
            ServiceKind::All => !self.0.is_empty(),
            s => self.0.contains(&s),
        }
    }

    pub fn is_subset(&self, other: &ServiceSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ServiceKind> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<ServiceKind> for ServiceSet {
    /// Drops `All` if present.
    fn from_iter<I: IntoIterator<Item = ServiceKind>>(iter: I) -> Self {
        ServiceSet(iter.into_iter().filter(|s| s.is_concrete()).collect())
    }
}

pub fn is_valid_model_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// Shape and provenance of one model. MLP width is uniform across layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub name: String,
    pub num_layers: u32,
    pub neurons_per_layer: u32,
    pub activation_function: String,
    pub dataset: String,
    #[serde(default)]
    pub available_services: ServiceSet,
}

impl ModelMetadata {
    pub fn check(&self) -> Result<(), MetadataError> {
        if !is_valid_model_name(&self.name) {
            return Err(MetadataError::InvalidName(self.name.clone()));
        }
        if self.num_layers == 0 {
            return Err(MetadataError::NoLayers(self.name.clone()));
        }
        if self.neurons_per_layer == 0 {
            return Err(MetadataError::NoNeurons(self.name.clone()));
        }
        if self.available_services.0.contains(&ServiceKind::All) {
            return Err(MetadataError::VirtualService);
        }
        Ok(())
    }

    /// Bounds-checks `(layer, neuron)` against this model.
    pub fn validate_path(&self, layer: u64, neuron: u64) -> Result<NeuronPath, PathError> {
        if layer >= u64::from(self.num_layers) {
            return Err(PathError::LayerOutOfRange {
                layer,
                num_layers: self.num_layers,
            });
        }
        if neuron >= u64::from(self.neurons_per_layer) {
            return Err(PathError::NeuronOutOfRange {
                neuron,
                neurons_per_layer: self.neurons_per_layer,
            });
        }
        Ok(NeuronPath::new(self.name.clone(), layer as u32, neuron as u32))
    }

    pub fn service_available(&self, service: ServiceKind) -> bool {
        self.available_services.contains(service)
    }

    pub fn total_neurons(&self) -> u64 {
        u64::from(self.num_layers) * u64::from(self.neurons_per_layer)
    }
}

/// Position of a neuron inside one model. Orders by `(layer, neuron)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: u32,
    pub neuron: u32,
}

impl NeuronId {
    pub fn new(layer: u32, neuron: u32) -> Self {
        NeuronId { layer, neuron }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.layer, self.neuron)
    }
}

/// Canonical address of a neuron.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronPath {
    pub model: String,
    pub layer: u32,
    pub neuron: u32,
}

impl NeuronPath {
    pub fn new(model: impl Into<String>, layer: u32, neuron: u32) -> Self {
        NeuronPath {
            model: model.into(),
            layer,
            neuron,
        }
    }

    pub fn id(&self) -> NeuronId {
        NeuronId::new(self.layer, self.neuron)
    }
}

impl fmt::Display for NeuronPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.model, self.layer, self.neuron)
    }
}

/// Per-neuron statistics, derived at ingest.
///
/// `max_activation` is the largest stored snippet activation, absent when the
/// neuron has no snippets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NeuronMetadata<F> {
    pub layer: u32,
    pub neuron: u32,
    pub max_activation: Option<F>,
    pub available_services: ServiceSet,
}
