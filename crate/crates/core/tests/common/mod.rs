#![allow(dead_code)]

use std::collections::BTreeSet;

use neuronhub_core::n2g::{N2GGraph, N2GNode};
use neuronhub_core::Graph;
use proptest::prelude::*;

pub const ALPHABET: &[&str] = &[
    "the", "a", "of", "dream", "hello", "hola", "apple", "river", "bank", "he", "she", "it", "sun",
    "moon", "star", "code",
];

/// Distinct trimmed, lowercased tokens. Written independently of the crate.
pub fn oracle_tokens(g: &Graph) -> BTreeSet<String> {
    g.nodes
        .iter()
        .map(|n| n.token.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn oracle_similarity(a: &Graph, b: &Graph) -> f64 {
    let (ta, tb) = (oracle_tokens(a), oracle_tokens(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let shared = ta.intersection(&tb).count() as f64;
    f64::max(shared / ta.len() as f64, shared / tb.len() as f64)
}

fn surface(token: &str, variant: u8) -> String {
    match variant % 4 {
        0 => token.to_string(),
        1 => format!(" {token}"),
        2 => token.to_uppercase(),
        _ => format!("  {}\t", token[..1].to_uppercase() + &token[1..]),
    }
}

/// Valid graphs of up to `max_nodes` nodes. Edges only run from a node to a
/// later one in generation order, so the result is acyclic.
pub fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(
                    (0..ALPHABET.len(), any::<u8>(), any::<bool>(), 0.0f64..=1.0),
                    n,
                ),
                prop::collection::vec((0..n, 0..n), 0..(2 * n)),
                Just((0..n as u32 * 3).collect::<Vec<u32>>()).prop_shuffle(),
            )
        })
        .prop_map(|(specs, raw_edges, ids)| {
            let mut nodes: Vec<N2GNode<f64>> = specs
                .iter()
                .enumerate()
                .map(|(i, &(t, v, end, imp))| N2GNode {
                    id: ids[i],
                    token: surface(ALPHABET[t], v),
                    is_end: end,
                    importance: if end { 1.0 } else { imp },
                })
                .collect();
            if !nodes.iter().any(|n| n.is_end) {
                let last = nodes.len() - 1;
                nodes[last].is_end = true;
                nodes[last].importance = 1.0;
            }
            let mut edges: Vec<(u32, u32)> = raw_edges
                .into_iter()
                .filter(|(a, b)| a < b)
                .map(|(a, b)| (ids[a], ids[b]))
                .collect();
            edges.sort();
            edges.dedup();
            N2GGraph { nodes, edges }
        })
}
