use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelEntry, Store};
use crate::domain::{MetadataError, ModelMetadata, NeuronId, NeuronMetadata, ServiceKind, ServiceSet};
use crate::explainer::parse_explanation;
use crate::n2g::{parse_graph, N2GGraph, N2GNode, SimilarNeuron, SimilarityCorpus};
use crate::neuroscope::{activation_extremes, parse_snippets, MAX_SNIPPETS};
use crate::search::build_index;
use crate::{Explanation, Graph, Scalar, Snippets};

/// Address of one ingested record; mirrors `<model>/<service>/<layer>/<neuron>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub model: String,
    pub service: ServiceKind,
    pub layer: u32,
    pub neuron: u32,
}

impl RecordKey {
    pub fn new(model: impl Into<String>, service: ServiceKind, layer: u32, neuron: u32) -> Self {
        RecordKey {
            model: model.into(),
            service,
            layer,
            neuron,
        }
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.model, self.service, self.layer, self.neuron)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error(transparent)]
    ModelNameInvalid(#[from] MetadataError),
    #[error("duplicate record {0}")]
    DuplicateKey(RecordKey),
    #[error("{} record(s) rejected; first: {}: {}", .rejected.len(), .rejected[0].key, .rejected[0].reason)]
    ValidationFailed { rejected: Vec<RejectedRecord> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub model: String,
    pub records_written: usize,
    pub graphs: usize,
    pub snippets: usize,
    pub explanations: usize,
    pub warnings: Vec<String>,
}

/// Stored form of a graph record: the graph plus its similar-neuron list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GraphPayload<F> {
    pub nodes: Vec<N2GNode<F>>,
    pub edges: Vec<(u32, u32)>,
    pub similar: Vec<SimilarNeuron<F>>,
}

impl<F: Scalar> GraphPayload<F> {
    pub fn graph(&self) -> N2GGraph<F> {
        N2GGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }
}

impl Store {
    /// Validates and adds one model, replacing any model of the same name.
    ///
    /// Either every record is accepted and the model is installed, or the
    /// store is left untouched.
    pub fn ingest_model<I>(&mut self, meta: ModelMetadata, records: I) -> Result<IngestReport, IngestError>
    where
        I: IntoIterator<Item = (RecordKey, Vec<u8>)>,
    {
        meta.check()?;
        let model = meta.name.clone();

        let mut seen = HashSet::new();
        let mut rejected = Vec::new();
        let mut graphs: BTreeMap<NeuronId, Graph> = BTreeMap::new();
        let mut snippets: BTreeMap<NeuronId, Snippets> = BTreeMap::new();
        let mut explanations: BTreeMap<NeuronId, Explanation> = BTreeMap::new();

        for (key, bytes) in records {
            if !seen.insert(key.clone()) {
                return Err(IngestError::DuplicateKey(key));
            }
            let mut reject = |reason: String| {
                rejected.push(RejectedRecord {
                    key: key.to_string(),
                    reason,
                })
            };
            if key.model != model {
                reject(format!("record belongs to model {:?}", key.model));
                continue;
            }
            let id = match meta.validate_path(key.layer.into(), key.neuron.into()) {
                Ok(path) => path.id(),
                Err(e) => {
                    reject(e.to_string());
                    continue;
                }
            };
            let parsed = match key.service {
                ServiceKind::Neuron2Graph => parse_graph(&bytes).map(|g| {
                    graphs.insert(id, g);
                }).map_err(|e| e.to_string()),
                ServiceKind::Neuroscope => parse_snippets(&bytes).map(|s| {
                    snippets.insert(id, s);
                }).map_err(|e| e.to_string()),
                ServiceKind::NeuronExplainer => parse_explanation(&bytes).map(|x| {
                    explanations.insert(id, x);
                }).map_err(|e| e.to_string()),
                s => Err(format!("service {s} is derived at ingest and cannot be supplied")),
            };
            if let Err(reason) = parsed {
                reject(reason);
            }
        }
        if !rejected.is_empty() {
            return Err(IngestError::ValidationFailed { rejected });
        }

        let params = self.params;
        let mut report = IngestReport {
            model: model.clone(),
            graphs: graphs.len(),
            snippets: snippets.len(),
            explanations: explanations.len(),
            ..Default::default()
        };
        let mut stored: BTreeMap<(ServiceKind, NeuronId), Vec<u8>> = BTreeMap::new();

        let index = build_index(graphs.iter().map(|(id, g)| (*id, g)), params.importance_floor);
        let corpus = SimilarityCorpus::new(graphs.iter().map(|(id, g)| (*id, g)));
        let similar = corpus.all_top_similar(params.similarity_k as usize, params.similarity_threshold);
        for ((id, graph), (sim_id, similar)) in graphs.into_iter().zip(similar) {
            debug_assert_eq!(id, sim_id);
            let payload = GraphPayload {
                nodes: graph.nodes,
                edges: graph.edges,
                similar,
            };
            stored.insert((ServiceKind::Neuron2Graph, id), to_json(&payload));
        }

        let mut max_activation = BTreeMap::new();
        for (id, snips) in snippets {
            if snips.texts.len() < MAX_SNIPPETS {
                let warning = format!(
                    "{model}/neuroscope/{}/{}: {} of {MAX_SNIPPETS} snippets",
                    id.layer,
                    id.neuron,
                    snips.texts.len()
                );
                tracing::warn!("{warning}");
                report.warnings.push(warning);
            }
            if let Ok((_, max)) = activation_extremes(&snips) {
                max_activation.insert(id, max);
            }
            stored.insert((ServiceKind::Neuroscope, id), to_json(&snips));
        }

        for (id, explanation) in explanations {
            stored.insert((ServiceKind::NeuronExplainer, id), to_json(&explanation));
        }

        let mut per_neuron: BTreeMap<NeuronId, BTreeSet<ServiceKind>> = BTreeMap::new();
        for &(service, id) in stored.keys() {
            per_neuron.entry(id).or_default().insert(service);
        }
        for (id, services) in per_neuron {
            let stats = NeuronMetadata {
                layer: id.layer,
                neuron: id.neuron,
                max_activation: max_activation.get(&id).copied(),
                available_services: services
                    .into_iter()
                    .chain([ServiceKind::Metadata])
                    .collect::<ServiceSet>(),
            };
            stored.insert((ServiceKind::Metadata, id), to_json(&stats));
        }

        let mut meta = meta;
        meta.available_services = stored.keys().map(|(s, _)| *s).collect();
        report.records_written = stored.len();
        self.models.insert(
            model,
            ModelEntry {
                meta,
                index,
                records: stored,
            },
        );
        Ok(report)
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("record serializes")
}
