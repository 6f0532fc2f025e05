//! Single-file store of every ingested record plus per-model search indexes.
//!
//! The whole store is held in memory once opened and is immutable from the
//! reader's point of view. Writes go through [`Store::ingest_model`] on an
//! owned value followed by [`Store::save`], which replaces the file with a
//! rename so concurrent openers see either the old or the new store.

mod format;
mod ingest;

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ModelMetadata, NeuronId, PathError, ServiceKind};
use crate::n2g::{DEFAULT_IMPORTANCE_FLOOR, DEFAULT_SIMILARITY_K, DEFAULT_SIMILARITY_THRESHOLD};
use crate::search::TokenIndex;

pub use format::{FORMAT_VERSION, MAGIC};
pub use ingest::{GraphPayload, IngestError, IngestReport, RecordKey, RejectedRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("not a store file (bad magic)")]
    BadMagic,
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Why a lookup found nothing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotFound {
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("service {service} is not available for model {model}")]
    ServiceUnavailable { model: String, service: ServiceKind },
    #[error(transparent)]
    OutOfRange(#[from] PathError),
    #[error("no {service} record for {model}/{layer}/{neuron}")]
    RecordAbsent {
        model: String,
        service: ServiceKind,
        layer: u32,
        neuron: u32,
    },
    #[error("`all` is an aggregate; use get_all")]
    VirtualService,
}

/// Parameters applied to every model ingested into a store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreParams {
    pub importance_floor: f64,
    pub similarity_k: u32,
    pub similarity_threshold: f64,
}

impl Default for StoreParams {
    fn default() -> Self {
        StoreParams {
            importance_floor: DEFAULT_IMPORTANCE_FLOOR,
            similarity_k: DEFAULT_SIMILARITY_K as u32,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    pub models: Vec<ModelMetadata>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub importance_floor: f64,
    pub similarity_k: u32,
    pub similarity_threshold: f64,
}

impl StoreManifest {
    pub fn params(&self) -> StoreParams {
        StoreParams {
            importance_floor: self.importance_floor,
            similarity_k: self.similarity_k,
            similarity_threshold: self.similarity_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ModelEntry {
    pub(crate) meta: ModelMetadata,
    pub(crate) index: TokenIndex,
    pub(crate) records: BTreeMap<(ServiceKind, NeuronId), Vec<u8>>,
}

/// A service and its payload, if the neuron has one.
pub type ServicePayload<'a> = (ServiceKind, Option<&'a [u8]>);

#[derive(Debug, Clone, PartialEq)]
pub struct Store {
    params: StoreParams,
    created_at: u64,
    models: BTreeMap<String, ModelEntry>,
}

impl Store {
    pub fn new(params: StoreParams, created_at: u64) -> Self {
        Store {
            params,
            created_at,
            models: BTreeMap::new(),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        format::decode(bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    /// Writes the store next to `path` and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        io::Write::write_all(&mut tmp, &self.to_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn manifest(&self) -> StoreManifest {
        StoreManifest {
            format_version: FORMAT_VERSION,
            models: self.models.values().map(|m| m.meta.clone()).collect(),
            created_at: self.created_at,
            importance_floor: self.params.importance_floor,
            similarity_k: self.params.similarity_k,
            similarity_threshold: self.params.similarity_threshold,
        }
    }

    pub fn params(&self) -> StoreParams {
        self.params
    }

    pub fn models(&self) -> impl Iterator<Item = &ModelMetadata> {
        self.models.values().map(|m| &m.meta)
    }

    pub fn model(&self, name: &str) -> Result<&ModelMetadata, NotFound> {
        self.entry(name).map(|m| &m.meta)
    }

    pub fn index(&self, model: &str) -> Result<&TokenIndex, NotFound> {
        self.entry(model).map(|m| &m.index)
    }

    fn entry(&self, model: &str) -> Result<&ModelEntry, NotFound> {
        self.models
            .get(model)
            .ok_or_else(|| NotFound::UnknownModel(model.to_string()))
    }

    /// Payload bytes stored for one concrete service of one neuron.
    pub fn get(&self, model: &str, service: ServiceKind, layer: u64, neuron: u64) -> Result<&[u8], NotFound> {
        if !service.is_concrete() {
            return Err(NotFound::VirtualService);
        }
        let entry = self.entry(model)?;
        let path = entry.meta.validate_path(layer, neuron)?;
        if !entry.meta.service_available(service) {
            return Err(NotFound::ServiceUnavailable {
                model: model.to_string(),
                service,
            });
        }
        entry
            .records
            .get(&(service, path.id()))
            .map(Vec::as_slice)
            .ok_or(NotFound::RecordAbsent {
                model: model.to_string(),
                service,
                layer: path.layer,
                neuron: path.neuron,
            })
    }

    /// One entry per service available for the model, `None` where the neuron
    /// has no record.
    pub fn get_all(&self, model: &str, layer: u64, neuron: u64) -> Result<Vec<ServicePayload<'_>>, NotFound> {
        let entry = self.entry(model)?;
        let id = entry.meta.validate_path(layer, neuron)?.id();
        Ok(entry
            .meta
            .available_services
            .iter()
            .map(|s| (s, entry.records.get(&(s, id)).map(Vec::as_slice)))
            .collect())
    }

    /// Whether each neuron of a layer has a record for `service`
    /// (any concrete service when `service` is `All`).
    pub fn layer_availability(&self, model: &str, service: ServiceKind, layer: u64) -> Result<Vec<bool>, NotFound> {
        let entry = self.entry(model)?;
        let path = entry.meta.validate_path(layer, 0)?;
        if !entry.meta.service_available(service) {
            return Err(NotFound::ServiceUnavailable {
                model: model.to_string(),
                service,
            });
        }
        let mut present = vec![false; entry.meta.neurons_per_layer as usize];
        let services: Vec<ServiceKind> = match service {
            ServiceKind::All => entry.meta.available_services.iter().collect(),
            s => vec![s],
        };
        for s in services {
            let lo = (s, NeuronId::new(path.layer, 0));
            let hi = (s, NeuronId::new(path.layer, u32::MAX));
            for ((_, id), _) in entry.records.range(lo..=hi) {
                present[id.neuron as usize] = true;
            }
        }
        Ok(present)
    }

    /// Every stored key of a model, in key order.
    pub fn keys<'a>(&'a self, model: &str) -> Result<impl Iterator<Item = (ServiceKind, NeuronId)> + 'a, NotFound> {
        Ok(self.entry(model)?.records.keys().copied())
    }

    pub fn record_count(&self) -> usize {
        self.models.values().map(|m| m.records.len()).sum()
    }
}
