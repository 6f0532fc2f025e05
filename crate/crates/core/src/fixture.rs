//! Deterministic synthetic data with planted ground truth.
//!
//! Given a [`FixtureSpec`], [`generate`] produces graph, snippet and
//! explanation records for one model together with a [`FixtureManifest`]
//! recording which neurons each token was planted into. The manifest comes
//! from the generator's own bookkeeping, so it can serve as an oracle for
//! search and similarity without re-running either algorithm.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ModelMetadata, NeuronId, ServiceKind, ServiceSet};
use crate::explainer::ExplanationRecord;
use crate::n2g::{normalize_token, N2GGraph, N2GNode, DEFAULT_IMPORTANCE_FLOOR};
use crate::neuroscope::{NeuronSnippets, SnippetRecord, MAX_SNIPPETS, MAX_SNIPPET_TOKENS};
use crate::store::RecordKey;

pub const MANIFEST_FILE: &str = "fixture-manifest.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary needs at least {needed} unplanted tokens, has {available}")]
    VocabularyTooSmall { needed: usize, available: usize },
    #[error("cannot plant {token:?} into {count} neurons: only {available} candidates")]
    NotEnoughNeurons {
        token: String,
        count: usize,
        available: usize,
    },
    #[error("cannot make {twins} twin pairs from {populated} populated neurons")]
    TooManyTwins { twins: usize, populated: usize },
    #[error("invalid fixture spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedToken {
    pub token: String,
    pub count: usize,
}

/// Which neurons receive records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    #[default]
    All,
    /// `per_layer` seeded neurons in every layer, plus the pinned ones.
    Sample { per_layer: u32, pinned: Vec<NeuronId> },
}

fn default_activation() -> String {
    "solu".into()
}

fn default_dataset() -> String {
    "synthetic".into()
}

fn default_snippets() -> usize {
    MAX_SNIPPETS
}

fn default_snippet_tokens() -> usize {
    64
}

fn default_floor() -> f64 {
    DEFAULT_IMPORTANCE_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub model: String,
    pub num_layers: u32,
    pub neurons_per_layer: u32,
    #[serde(default = "default_activation")]
    pub activation_function: String,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub vocabulary: Vec<String>,
    pub seed: u64,
    pub services: ServiceSet,
    #[serde(default)]
    pub planted: Vec<PlantedToken>,
    #[serde(default)]
    pub population: Population,
    #[serde(default = "default_snippets")]
    pub snippets_per_neuron: usize,
    #[serde(default = "default_snippet_tokens")]
    pub snippet_tokens: usize,
    /// Pairs of neurons given token-identical graphs.
    #[serde(default)]
    pub twins: usize,
    /// Floor the manifest's `important` sets are recorded against.
    #[serde(default = "default_floor")]
    pub importance_floor: f64,
}

impl FixtureSpec {
    /// All three data services over the default vocabulary.
    pub fn new(model: impl Into<String>, num_layers: u32, neurons_per_layer: u32, seed: u64) -> Self {
        FixtureSpec {
            model: model.into(),
            num_layers,
            neurons_per_layer,
            activation_function: default_activation(),
            dataset: default_dataset(),
            vocabulary: DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            seed,
            services: ServiceKind::DATA.into_iter().collect(),
            planted: Vec::new(),
            population: Population::All,
            snippets_per_neuron: MAX_SNIPPETS,
            snippet_tokens: default_snippet_tokens(),
            twins: 0,
            importance_floor: DEFAULT_IMPORTANCE_FLOOR,
        }
    }

    pub fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            name: self.model.clone(),
            num_layers: self.num_layers,
            neurons_per_layer: self.neurons_per_layer,
            activation_function: self.activation_function.clone(),
            dataset: self.dataset.clone(),
            available_services: ServiceSet::new(),
        }
    }
}

/// Ground truth written next to the generated records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub model: String,
    pub seed: u64,
    pub importance_floor: f64,
    pub neurons: Vec<NeuronId>,
    pub planted: Vec<PlantedToken>,
    /// Normalized token to neurons with that token as an end node.
    pub activating: BTreeMap<String, BTreeSet<NeuronId>>,
    /// Normalized token to neurons where it meets the importance floor.
    pub important: BTreeMap<String, BTreeSet<NeuronId>>,
    /// Neuron pairs whose graphs share exactly the same token set.
    pub twins: Vec<(NeuronId, NeuronId)>,
}

impl FixtureManifest {
    pub fn expected_any(&self, token: &str) -> BTreeSet<NeuronId> {
        let mut out = self.activating.get(token).cloned().unwrap_or_default();
        out.extend(self.important.get(token).into_iter().flatten());
        out
    }
}

pub struct GeneratedFixture {
    pub meta: ModelMetadata,
    pub records: Vec<(RecordKey, Vec<u8>)>,
    pub manifest: FixtureManifest,
}

/// One node before ids and surface forms are assigned.
#[derive(Clone)]
struct PlannedNode {
    token: String,
    is_end: bool,
    importance: f64,
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// Random capitalization and leading space; normalizes back to `token`.
fn surface_form(rng: &mut ChaCha8Rng, token: &str) -> String {
    let mut s = match rng.gen_range(0..3) {
        0 => token.to_string(),
        1 => token.to_uppercase(),
        _ => {
            let mut chars = token.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
    };
    if rng.gen_bool(0.5) {
        s.insert(0, ' ');
    }
    s
}

pub fn generate(spec: &FixtureSpec) -> Result<GeneratedFixture, FixtureError> {
    let meta = spec.metadata();
    meta.check().map_err(|e| FixtureError::Invalid(e.to_string()))?;
    if spec.snippet_tokens == 0 || spec.snippet_tokens > MAX_SNIPPET_TOKENS {
        return Err(FixtureError::Invalid(format!(
            "snippet_tokens must be in 1..={MAX_SNIPPET_TOKENS}"
        )));
    }
    if spec.snippets_per_neuron > MAX_SNIPPETS {
        return Err(FixtureError::Invalid(format!(
            "snippets_per_neuron must be at most {MAX_SNIPPETS}"
        )));
    }
    if !(0.0..=1.0).contains(&spec.importance_floor) {
        return Err(FixtureError::Invalid("importance_floor must be in [0, 1]".into()));
    }

    let mut vocabulary: Vec<String> = Vec::new();
    for token in spec.vocabulary.iter().map(|t| normalize_token(t)) {
        if !token.is_empty() && !vocabulary.contains(&token) {
            vocabulary.push(token);
        }
    }
    if vocabulary.is_empty() {
        return Err(FixtureError::EmptyVocabulary);
    }
    let planted: Vec<PlantedToken> = spec
        .planted
        .iter()
        .map(|p| PlantedToken {
            token: normalize_token(&p.token),
            count: p.count,
        })
        .collect();
    let planted_tokens: BTreeSet<&str> = planted.iter().map(|p| p.token.as_str()).collect();
    let free: Vec<&str> = vocabulary
        .iter()
        .map(String::as_str)
        .filter(|t| !planted_tokens.contains(t))
        .collect();
    // Up to 2 end tokens and 4 context tokens, all distinct.
    if spec.services.contains(ServiceKind::Neuron2Graph) && free.len() < 6 {
        return Err(FixtureError::VocabularyTooSmall {
            needed: 6,
            available: free.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let neurons = populate(spec, &mut rng);

    let mut manifest = FixtureManifest {
        model: spec.model.clone(),
        seed: spec.seed,
        importance_floor: spec.importance_floor,
        neurons: neurons.clone(),
        planted: planted.clone(),
        activating: BTreeMap::new(),
        important: BTreeMap::new(),
        twins: Vec::new(),
    };
    let mut records = Vec::new();
    let key = |service, id: NeuronId| RecordKey::new(spec.model.clone(), service, id.layer, id.neuron);

    if spec.services.contains(ServiceKind::Neuron2Graph) {
        if spec.twins * 2 > neurons.len() {
            return Err(FixtureError::TooManyTwins {
                twins: spec.twins,
                populated: neurons.len(),
            });
        }
        let mut shuffled = neurons.clone();
        shuffled.shuffle(&mut rng);
        let mut copy_of: BTreeMap<NeuronId, NeuronId> = BTreeMap::new();
        for pair in shuffled[..spec.twins * 2].chunks(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            copy_of.insert(b, a);
            manifest.twins.push((a, b));
        }
        manifest.twins.sort();

        let twin_members: BTreeSet<NeuronId> = manifest.twins.iter().flat_map(|&(a, b)| [a, b]).collect();
        let candidates: Vec<NeuronId> = neurons.iter().copied().filter(|n| !twin_members.contains(n)).collect();
        let mut plants: BTreeMap<NeuronId, Vec<&str>> = BTreeMap::new();
        for p in &planted {
            if p.count > candidates.len() {
                return Err(FixtureError::NotEnoughNeurons {
                    token: p.token.clone(),
                    count: p.count,
                    available: candidates.len(),
                });
            }
            let mut chosen: Vec<NeuronId> = candidates.choose_multiple(&mut rng, p.count).copied().collect();
            chosen.sort();
            for id in chosen {
                plants.entry(id).or_default().push(&p.token);
            }
        }

        let mut plans: BTreeMap<NeuronId, Vec<PlannedNode>> = BTreeMap::new();
        for &id in &neurons {
            let plan = match copy_of.get(&id) {
                Some(source) => plans[source].clone(),
                None => plan_graph(
                    &mut rng,
                    &free,
                    plants.get(&id).map(Vec::as_slice).unwrap_or(&[]),
                    spec.importance_floor,
                ),
            };
            for node in &plan {
                if node.is_end {
                    manifest.activating.entry(node.token.clone()).or_default().insert(id);
                }
                if node.importance >= spec.importance_floor {
                    manifest.important.entry(node.token.clone()).or_default().insert(id);
                }
            }
            let graph = materialize(&mut rng, &plan);
            records.push((key(ServiceKind::Neuron2Graph, id), pretty(&graph)));
            plans.insert(id, plan);
        }
    }

    if spec.services.contains(ServiceKind::Neuroscope) {
        for &id in &neurons {
            let snippets = make_snippets(&mut rng, spec, &vocabulary);
            records.push((key(ServiceKind::Neuroscope, id), pretty(&snippets)));
        }
    }

    if spec.services.contains(ServiceKind::NeuronExplainer) {
        for &id in &neurons {
            let a = vocabulary.choose(&mut rng).unwrap();
            let b = vocabulary.choose(&mut rng).unwrap();
            let text = match rng.gen_range(0..3) {
                0 => format!("references to \"{a}\" and \"{b}\"."),
                1 => format!("the word \"{a}\" following \"{b}\"."),
                _ => format!("phrases about {a}."),
            };
            let record = ExplanationRecord {
                text,
                score: round_to(rng.gen_range(0.0..=1.0), 3),
            };
            records.push((key(ServiceKind::NeuronExplainer, id), pretty(&record)));
        }
    }

    Ok(GeneratedFixture {
        meta,
        records,
        manifest,
    })
}

fn populate(spec: &FixtureSpec, rng: &mut ChaCha8Rng) -> Vec<NeuronId> {
    match &spec.population {
        Population::All => (0..spec.num_layers)
            .flat_map(|l| (0..spec.neurons_per_layer).map(move |n| NeuronId::new(l, n)))
            .collect(),
        Population::Sample { per_layer, pinned } => {
            let mut chosen: BTreeSet<NeuronId> = pinned
                .iter()
                .copied()
                .filter(|id| id.layer < spec.num_layers && id.neuron < spec.neurons_per_layer)
                .collect();
            let all: Vec<u32> = (0..spec.neurons_per_layer).collect();
            for layer in 0..spec.num_layers {
                for &n in all.choose_multiple(rng, (*per_layer).min(spec.neurons_per_layer) as usize) {
                    chosen.insert(NeuronId::new(layer, n));
                }
            }
            chosen.into_iter().collect()
        }
    }
}

fn plan_graph(rng: &mut ChaCha8Rng, free: &[&str], planted: &[&str], floor: f64) -> Vec<PlannedNode> {
    let n_end = rng.gen_range(1..=2);
    let n_context = rng.gen_range(0..=4);
    let picks: Vec<&str> = free.choose_multiple(rng, n_end + n_context).copied().collect();
    let mut plan: Vec<PlannedNode> = planted
        .iter()
        .chain(&picks[..n_end])
        .map(|t| PlannedNode {
            token: t.to_string(),
            is_end: true,
            importance: 1.0,
        })
        .collect();
    for t in &picks[n_end..] {
        let u = rng.gen_range(0.1..0.9);
        let importance = if rng.gen_bool(0.5) {
            floor + (1.0 - floor) * u
        } else {
            floor * u
        };
        plan.push(PlannedNode {
            token: t.to_string(),
            is_end: false,
            importance: round_to(importance, 4),
        });
    }
    plan
}

/// Assigns shuffled ids, surface forms and context-to-end edges.
fn materialize(rng: &mut ChaCha8Rng, plan: &[PlannedNode]) -> N2GGraph<f64> {
    let mut ids: Vec<u32> = (0..(plan.len() as u32 * 4)).collect();
    ids.shuffle(rng);
    let ids = &ids[..plan.len()];

    let ends: Vec<usize> = (0..plan.len()).filter(|&i| plan[i].is_end).collect();
    let mut edges = Vec::new();
    for i in (0..plan.len()).filter(|&i| !plan[i].is_end) {
        let end = *ends.choose(rng).unwrap();
        edges.push((ids[i], ids[end]));
        // Context chains only point to later nodes, keeping the graph acyclic.
        if let Some(j) = ((i + 1)..plan.len()).find(|&j| !plan[j].is_end) {
            if rng.gen_bool(0.5) {
                edges.push((ids[i], ids[j]));
            }
        }
    }

    let mut nodes: Vec<N2GNode<f64>> = plan
        .iter()
        .zip(ids)
        .map(|(p, &id)| N2GNode {
            id,
            token: surface_form(rng, &p.token),
            is_end: p.is_end,
            importance: p.importance,
        })
        .collect();
    nodes.shuffle(rng);
    edges.shuffle(rng);
    N2GGraph { nodes, edges }
}

fn make_snippets(rng: &mut ChaCha8Rng, spec: &FixtureSpec, vocabulary: &[String]) -> NeuronSnippets<f64> {
    let scale = rng.gen_range(0.5..4.0);
    let mut texts: Vec<SnippetRecord<f64>> = (0..spec.snippets_per_neuron)
        .map(|_| {
            let tokens: Vec<String> = (0..spec.snippet_tokens)
                .map(|_| {
                    let token = vocabulary.choose(rng).unwrap();
                    surface_form(rng, token)
                })
                .collect();
            let activations: Vec<f64> = (0..spec.snippet_tokens)
                .map(|_| round_to(scale * rng.gen_range(-0.2f64..1.0).powi(3), 4))
                .collect();
            SnippetRecord::from_activations(tokens, activations).expect("non-empty and parallel")
        })
        .collect();
    texts.sort_by(|a, b| b.max_activation.total_cmp(&a.max_activation));
    NeuronSnippets { texts }
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("fixture record serializes");
    bytes.push(b'\n');
    bytes
}

/// Writes `<out>/<model>/model.json`, the sidecar manifest, and every record
/// under `<out>/<model>/<service>/<layer>/<neuron>.json`.
pub fn write_tree(spec: &FixtureSpec, out_dir: &Path) -> Result<FixtureManifest, FixtureError> {
    let fixture = generate(spec)?;
    let model_dir = out_dir.join(&spec.model);
    std::fs::create_dir_all(&model_dir)?;
    std::fs::write(model_dir.join(MODEL_FILE), pretty(&fixture.meta))?;
    std::fs::write(model_dir.join(MANIFEST_FILE), pretty(&fixture.manifest))?;
    for (key, bytes) in &fixture.records {
        let dir = model_dir.join(key.service.name()).join(key.layer.to_string());
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("{}.json", key.neuron)), bytes)?;
    }
    Ok(fixture.manifest)
}

/// Models of the bundled demo dataset.
///
/// `solu-8l` carries the `7/1423` address used in API examples, `solu-6l` is
/// fully populated for search, and `gpt2-small` carries explanations.
pub fn demo_specs() -> Vec<FixtureSpec> {
    let mut solu8 = FixtureSpec::new("solu-8l", 8, 2048, 8);
    solu8.dataset = "pile".into();
    solu8.services = [ServiceKind::Neuron2Graph, ServiceKind::Neuroscope].into_iter().collect();
    solu8.population = Population::Sample {
        per_layer: 8,
        pinned: vec![NeuronId::new(7, 1423)],
    };
    solu8.snippet_tokens = 128;

    let mut solu6 = FixtureSpec::new("solu-6l", 6, 64, 6);
    solu6.dataset = "pile".into();
    solu6.services = [ServiceKind::Neuron2Graph, ServiceKind::Neuroscope].into_iter().collect();
    solu6.planted = [("hello", 7), ("hola", 0), ("happy", 9), ("dream", 4)]
        .into_iter()
        .map(|(t, c)| PlantedToken {
            token: t.into(),
            count: c,
        })
        .collect();
    solu6.twins = 4;
    solu6.snippet_tokens = 32;

    let mut gpt2 = FixtureSpec::new("gpt2-small", 12, 3072, 12);
    gpt2.activation_function = "gelu".into();
    gpt2.dataset = "openwebtext".into();
    gpt2.services = [ServiceKind::Neuroscope, ServiceKind::NeuronExplainer].into_iter().collect();
    gpt2.population = Population::Sample {
        per_layer: 4,
        pinned: vec![],
    };

    vec![solu8, solu6, gpt2]
}

pub use crate::vocabulary::DEFAULT_VOCABULARY;
