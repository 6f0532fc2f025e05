//! Token activation graphs: validation, token extraction and similarity.
//!
//! A graph describes the token contexts that drive one neuron. End nodes are
//! the tokens the neuron fires on; every other node is context, weighted by
//! how much it contributes to the end-token activation. Edges point from
//! context toward the end token.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::NeuronId;
use crate::Scalar;

/// Default minimum importance for a node to count as an important token.
pub const DEFAULT_IMPORTANCE_FLOOR: f64 = 0.5;
pub const DEFAULT_SIMILARITY_K: usize = 10;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
}

fn malformed(reason: impl Into<String>) -> GraphError {
    GraphError::MalformedGraph(reason.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct N2GNode<F> {
    pub id: u32,
    pub token: String,
    pub is_end: bool,
    pub importance: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct N2GGraph<F> {
    pub nodes: Vec<N2GNode<F>>,
    pub edges: Vec<(u32, u32)>,
}

impl<F> Default for N2GGraph<F> {
    fn default() -> Self {
        N2GGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }
}

impl<F: Scalar> N2GGraph<F> {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks ids, edges, acyclicity and importances.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (pos, node) in self.nodes.iter().enumerate() {
            if index.insert(node.id, pos).is_some() {
                return Err(malformed(format!("duplicate node id {}", node.id)));
            }
            if !node.importance.unit_interval_contains() {
                return Err(malformed(format!(
                    "node {} importance {} outside [0, 1]",
                    node.id, node.importance
                )));
            }
            if node.is_end && node.importance != F::one() {
                return Err(malformed(format!(
                    "end node {} must have importance 1, found {}",
                    node.id, node.importance
                )));
            }
        }
        if !self.nodes.is_empty() && !self.nodes.iter().any(|n| n.is_end) {
            return Err(malformed("graph has no end node"));
        }

        let mut out_edges = vec![Vec::new(); self.nodes.len()];
        let mut in_degree = vec![0usize; self.nodes.len()];
        for &(from, to) in &self.edges {
            let (Some(&f), Some(&t)) = (index.get(&from), index.get(&to)) else {
                return Err(malformed(format!("edge ({from}, {to}) references an unknown node")));
            };
            out_edges[f].push(t);
            in_degree[t] += 1;
        }

        // Kahn's algorithm: a cycle leaves nodes with nonzero in-degree.
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| in_degree[i] == 0).collect();
        let mut visited = 0;
        while let Some(i) = ready.pop() {
            visited += 1;
            for &t in &out_edges[i] {
                in_degree[t] -= 1;
                if in_degree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        if visited != self.nodes.len() {
            return Err(malformed("graph contains a cycle"));
        }
        Ok(())
    }

    /// Distinct normalized tokens over all nodes, blanks excluded.
    pub fn token_set(&self) -> TokenSet {
        TokenSet(
            self.nodes
                .iter()
                .map(|n| normalize_token(&n.token))
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }
}

/// Parses and validates the JSON wire form of a graph.
pub fn parse_graph<F: Scalar>(bytes: &[u8]) -> Result<N2GGraph<F>, GraphError> {
    let graph: N2GGraph<F> = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    graph.validate()?;
    Ok(graph)
}

pub fn serialize_graph<F: Scalar>(graph: &N2GGraph<F>) -> Vec<u8> {
    serde_json::to_vec(graph).expect("graph serialization is infallible")
}

/// Trims surrounding whitespace and lowercases.
pub fn normalize_token(raw: &str) -> String {
    raw.trim().to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSets {
    pub activating: BTreeSet<String>,
    pub important: BTreeSet<String>,
}

pub fn token_sets<F: Scalar>(graph: &N2GGraph<F>, importance_floor: F) -> TokenSets {
    let mut sets = TokenSets::default();
    for node in &graph.nodes {
        let token = normalize_token(&node.token);
        if token.is_empty() {
            continue;
        }
        if node.importance >= importance_floor {
            sets.important.insert(token.clone());
        }
        if node.is_end {
            sets.activating.insert(token);
        }
    }
    sets
}

/// Distinct normalized tokens of one graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSet(HashSet<String>);

impl TokenSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().filter(|t| large.0.contains(*t)).count()
    }

    /// Two-way maximum overlap: `max(|A∩B|/|A|, |A∩B|/|B|)`, zero if either is empty.
    pub fn similarity<F: Scalar>(&self, other: &TokenSet) -> SimilarityScore<F> {
        if self.is_empty() || other.is_empty() {
            return SimilarityScore::zero();
        }
        overlap_score(self.intersection_len(other), self.len(), other.len())
    }
}

fn overlap_score<F: Scalar>(shared: usize, len_a: usize, len_b: usize) -> SimilarityScore<F> {
    // The smaller denominator yields the larger proportion.
    SimilarityScore(F::from_ratio(shared, len_a.min(len_b)))
}

/// Similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent, bound = "F: Scalar")]
pub struct SimilarityScore<F>(F);

impl<F: Scalar> SimilarityScore<F> {
    pub fn zero() -> Self {
        SimilarityScore(F::zero())
    }

    pub fn value(self) -> F {
        self.0
    }
}

pub fn similarity<F: Scalar>(a: &N2GGraph<F>, b: &N2GGraph<F>) -> SimilarityScore<F> {
    a.token_set().similarity(&b.token_set())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("target neuron {0} has no graph in the corpus")]
    TargetGraphMissing(NeuronId),
}

/// One entry of a similar-neuron list, as stored in graph payloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SimilarNeuron<F> {
    pub layer: u32,
    pub neuron: u32,
    pub similarity: SimilarityScore<F>,
}

impl<F: Scalar> SimilarNeuron<F> {
    pub fn id(&self) -> NeuronId {
        NeuronId::new(self.layer, self.neuron)
    }
}

/// Score descending, then `(layer, neuron)` ascending.
fn rank_order<F: Scalar>(a: &SimilarNeuron<F>, b: &SimilarNeuron<F>) -> std::cmp::Ordering {
    b.similarity
        .value()
        .partial_cmp(&a.similarity.value())
        .expect("similarity scores are never NaN")
        .then_with(|| a.id().cmp(&b.id()))
}

fn rank<F: Scalar>(mut hits: Vec<SimilarNeuron<F>>, k: usize) -> Vec<SimilarNeuron<F>> {
    hits.sort_by(rank_order);
    hits.truncate(k);
    hits
}

/// Token sets of every graph in one model, with a postings list per token.
///
/// Similar-neuron lists are computed from postings: a neuron sharing no token
/// with the target scores zero and can only qualify when `threshold <= 0`, in
/// which case the whole corpus is scanned.
pub struct SimilarityCorpus {
    ids: Vec<NeuronId>,
    sets: Vec<TokenSet>,
    position: HashMap<NeuronId, usize>,
    postings: HashMap<String, Vec<usize>>,
}

impl SimilarityCorpus {
    pub fn new<'a, F: Scalar>(graphs: impl IntoIterator<Item = (NeuronId, &'a N2GGraph<F>)>) -> Self {
        let mut entries: Vec<(NeuronId, TokenSet)> =
            graphs.into_iter().map(|(id, g)| (id, g.token_set())).collect();
        entries.sort_by_key(|(id, _)| *id);
        entries.dedup_by_key(|(id, _)| *id);

        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (pos, (_, set)) in entries.iter().enumerate() {
            for token in set.iter() {
                postings.entry(token.to_string()).or_default().push(pos);
            }
        }
        let position = entries.iter().enumerate().map(|(pos, (id, _))| (*id, pos)).collect();
        let (ids, sets) = entries.into_iter().unzip();
        SimilarityCorpus {
            ids,
            sets,
            position,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NeuronId] {
        &self.ids
    }

    pub fn top_similar<F: Scalar>(
        &self,
        target: NeuronId,
        k: usize,
        threshold: F,
    ) -> Result<Vec<SimilarNeuron<F>>, SimilarityError> {
        let &t = self
            .position
            .get(&target)
            .ok_or(SimilarityError::TargetGraphMissing(target))?;
        let target_set = &self.sets[t];

        let hit = |pos: usize, score: SimilarityScore<F>| SimilarNeuron {
            layer: self.ids[pos].layer,
            neuron: self.ids[pos].neuron,
            similarity: score,
        };

        let hits = if threshold <= F::zero() || target_set.is_empty() {
            (0..self.len())
                .filter(|&pos| pos != t)
                .map(|pos| hit(pos, target_set.similarity(&self.sets[pos])))
                .filter(|h| h.similarity.value() >= threshold)
                .collect()
        } else {
            let mut shared: HashMap<usize, usize> = HashMap::new();
            for token in target_set.iter() {
                for &pos in &self.postings[token] {
                    if pos != t {
                        *shared.entry(pos).or_default() += 1;
                    }
                }
            }
            shared
                .into_iter()
                .map(|(pos, n)| hit(pos, overlap_score(n, target_set.len(), self.sets[pos].len())))
                .filter(|h| h.similarity.value() >= threshold)
                .collect()
        };
        Ok(rank(hits, k))
    }

    /// Similar-neuron lists for every neuron, in id order. Parallel and deterministic.
    pub fn all_top_similar<F: Scalar>(&self, k: usize, threshold: F) -> Vec<(NeuronId, Vec<SimilarNeuron<F>>)> {
        self.ids
            .par_iter()
            .map(|&id| {
                let list = self
                    .top_similar(id, k, threshold)
                    .expect("every corpus id has a graph");
                (id, list)
            })
            .collect()
    }
}

/// Ranks every other graph in `corpus` against `target`.
pub fn top_similar<F: Scalar>(
    target: NeuronId,
    corpus: &[(NeuronId, N2GGraph<F>)],
    k: usize,
    threshold: F,
) -> Result<Vec<SimilarNeuron<F>>, SimilarityError> {
    SimilarityCorpus::new(corpus.iter().map(|(id, g)| (*id, g))).top_similar(target, k, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, token: &str, is_end: bool, importance: f64) -> N2GNode<f64> {
        N2GNode {
            id,
            token: token.into(),
            is_end,
            importance,
        }
    }

    fn chain(tokens: &[&str]) -> N2GGraph<f64> {
        let n = tokens.len() as u32;
        N2GGraph {
            nodes: tokens
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let end = i as u32 == n - 1;
                    node(i as u32, t, end, if end { 1.0 } else { 0.5 })
                })
                .collect(),
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    #[test]
    fn normalize() {
        assert_eq!(normalize_token(" The"), "the");
        assert_eq!(normalize_token("hello"), "hello");
        assert_eq!(normalize_token("  Apple "), "apple");
        assert_eq!(normalize_token("\t\n"), "");
        let once = normalize_token(" ÄBC ");
        assert_eq!(normalize_token(&once), once);
    }

    #[test]
    fn token_sets_cases() {
        let empty = N2GGraph::<f64>::default();
        assert_eq!(token_sets(&empty, 0.5), TokenSets::default());

        let single = N2GGraph {
            nodes: vec![node(0, "hello", true, 1.0)],
            edges: vec![],
        };
        let sets = token_sets(&single, 0.5);
        assert_eq!(sets.activating.len(), 1);
        assert_eq!(sets.important, sets.activating);

        // Two end nodes, context at 0.6 (kept) and 0.2 (dropped) with floor 0.5.
        let four = N2GGraph {
            nodes: vec![
                node(0, " dream", true, 1.0),
                node(1, "Sleep", true, 1.0),
                node(2, " a", false, 0.6),
                node(3, "the", false, 0.2),
            ],
            edges: vec![(2, 0), (3, 2), (3, 1)],
        };
        let sets = token_sets(&four, 0.5);
        assert_eq!(sets.activating.len(), 2);
        assert_eq!(sets.important.len(), 3);
        assert!(sets.important.contains("a"));
        assert!(!sets.important.contains("the"));
    }

    #[test]
    fn similarity_cases() {
        let g = chain(&["a", "b", "c"]);
        assert_eq!(similarity(&g, &g).value(), 1.0);
        assert_eq!(similarity(&g, &chain(&["x", "y"])).value(), 0.0);
        assert_eq!(similarity(&g, &N2GGraph::default()).value(), 0.0);

        // |A| = 4, |B| = 8, |A ∩ B| = 2.
        let a = chain(&["p", "q", "r", "s"]);
        let b = chain(&["p", "q", "t", "u", "v", "w", "x", "y"]);
        assert_eq!(similarity(&a, &b).value(), 0.5);
        assert_eq!(similarity(&b, &a).value(), 0.5);
    }

    #[test]
    fn similarity_f32() {
        let a: N2GGraph<f32> = parse_graph(&serialize_graph(&chain(&["p", "q", "r", "s"]))).unwrap();
        let b: N2GGraph<f32> = parse_graph(&serialize_graph(&chain(&["p", "z"]))).unwrap();
        assert_eq!(similarity(&a, &b).value(), 0.5f32);
    }

    #[test]
    fn malformed_graphs() {
        let dangling = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":1.0}],"edges":[[0,5]]}"#;
        assert!(matches!(parse_graph::<f64>(dangling), Err(GraphError::MalformedGraph(_))));

        let dup = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":1.0},{"id":0,"token":"b","is_end":false,"importance":0.1}],"edges":[]}"#;
        assert!(parse_graph::<f64>(dup).is_err());

        let cycle = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":1.0},{"id":1,"token":"b","is_end":false,"importance":0.1}],"edges":[[0,1],[1,0]]}"#;
        assert!(parse_graph::<f64>(cycle).unwrap_err().to_string().contains("cycle"));

        let self_loop = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":1.0}],"edges":[[0,0]]}"#;
        assert!(parse_graph::<f64>(self_loop).is_err());

        let range = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":1.0},{"id":1,"token":"b","is_end":false,"importance":1.5}],"edges":[]}"#;
        assert!(parse_graph::<f64>(range).is_err());

        let weak_end = br#"{"nodes":[{"id":0,"token":"a","is_end":true,"importance":0.7}],"edges":[]}"#;
        assert!(parse_graph::<f64>(weak_end).is_err());

        let no_end = br#"{"nodes":[{"id":0,"token":"a","is_end":false,"importance":0.7}],"edges":[]}"#;
        assert!(parse_graph::<f64>(no_end).is_err());

        assert!(parse_graph::<f64>(b"not json").is_err());
    }

    #[test]
    fn empty_graph_round_trip() {
        let empty = N2GGraph::<f64>::default();
        let bytes = serialize_graph(&empty);
        assert_eq!(parse_graph::<f64>(&bytes).unwrap(), empty);
        assert_eq!(bytes, br#"{"nodes":[],"edges":[]}"#);
    }

    #[test]
    fn top_similar_cases() {
        let target = NeuronId::new(0, 0);
        let alone = vec![(target, chain(&["a", "b"]))];
        assert!(top_similar(target, &alone, 10, 0.5).unwrap().is_empty());

        let corpus = vec![
            (target, chain(&["a", "b"])),
            (NeuronId::new(0, 1), chain(&["b", "a"])),
            (NeuronId::new(0, 2), chain(&["x", "y", "z"])),
        ];
        let hits = top_similar(target, &corpus, 10, 0.5).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id(), NeuronId::new(0, 1));
        assert_eq!(hits[0].similarity.value(), 1.0);

        assert_eq!(
            top_similar(NeuronId::new(3, 3), &corpus, 10, 0.5),
            Err(SimilarityError::TargetGraphMissing(NeuronId::new(3, 3)))
        );

        // Zero threshold admits disjoint neighbours, ordered by id after score.
        let all = top_similar(target, &corpus, 10, 0.0).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].similarity.value(), 0.0);
    }

    #[test]
    fn ties_break_on_layer_then_neuron() {
        let target = NeuronId::new(1, 5);
        let corpus = vec![
            (target, chain(&["a", "b"])),
            (NeuronId::new(2, 0), chain(&["a", "b"])),
            (NeuronId::new(0, 9), chain(&["a", "b"])),
            (NeuronId::new(0, 3), chain(&["b", "a", "q"])),
        ];
        let ids: Vec<_> = top_similar(target, &corpus, 2, 0.4)
            .unwrap()
            .iter()
            .map(|h| h.id())
            .collect();
        assert_eq!(ids, vec![NeuronId::new(0, 3), NeuronId::new(0, 9)]);
    }
}
