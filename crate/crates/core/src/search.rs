//! Inverted token index over activation graphs and its query grammar.
//!
//! Queries have the form `<qualifier>:<token>`. `activating` matches neurons
//! whose graph has the token as an end node, `important` matches neurons
//! where the token meets the importance floor, and `any` is their union.
//! Matching is exact on normalized tokens.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::NeuronId;
use crate::n2g::{normalize_token, token_sets, N2GGraph};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown qualifier {0:?}; expected any, activating or important")]
    UnknownQualifier(String),
    #[error("query token is empty after normalization")]
    EmptyToken,
    #[error("query must have the form <qualifier>:<token>")]
    MissingSeparator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qualifier {
    Any,
    Activating,
    Important,
}

impl Qualifier {
    pub const ALL: [Qualifier; 3] = [Qualifier::Any, Qualifier::Activating, Qualifier::Important];

    pub fn keyword(self) -> &'static str {
        match self {
            Qualifier::Any => "any",
            Qualifier::Activating => "activating",
            Qualifier::Important => "important",
        }
    }
}

impl FromStr for Qualifier {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "any" => Ok(Qualifier::Any),
            "activating" => Ok(Qualifier::Activating),
            "important" => Ok(Qualifier::Important),
            other => Err(QueryError::UnknownQualifier(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchQuery {
    pub qualifier: Qualifier,
    pub token: String,
}

impl fmt::Display for SearchQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.qualifier.keyword(), self.token)
    }
}

pub fn parse_query(raw: &str) -> Result<SearchQuery, QueryError> {
    let (qualifier, token) = raw.split_once(':').ok_or(QueryError::MissingSeparator)?;
    let qualifier = qualifier.parse()?;
    let token = normalize_token(token);
    if token.is_empty() {
        return Err(QueryError::EmptyToken);
    }
    Ok(SearchQuery { qualifier, token })
}

impl FromStr for SearchQuery {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

/// Normalized token to the neurons it activates or modulates, for one model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIndex {
    pub activating: BTreeMap<String, BTreeSet<NeuronId>>,
    pub important: BTreeMap<String, BTreeSet<NeuronId>>,
}

impl TokenIndex {
    pub fn is_empty(&self) -> bool {
        self.activating.is_empty() && self.important.is_empty()
    }

    /// Every token present under either qualifier.
    pub fn tokens(&self) -> BTreeSet<&str> {
        self.activating
            .keys()
            .chain(self.important.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn search(&self, query: &SearchQuery) -> Vec<NeuronId> {
        let activating = self.activating.get(&query.token).into_iter().flatten();
        let important = self.important.get(&query.token).into_iter().flatten();
        match query.qualifier {
            Qualifier::Activating => activating.copied().collect(),
            Qualifier::Important => important.copied().collect(),
            Qualifier::Any => activating
                .chain(important)
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }
}

/// Indexes one model's graphs. Input order does not affect the result.
pub fn build_index<'a, F: Scalar>(
    graphs: impl IntoIterator<Item = (NeuronId, &'a N2GGraph<F>)>,
    importance_floor: F,
) -> TokenIndex {
    let mut index = TokenIndex::default();
    for (id, graph) in graphs {
        let sets = token_sets(graph, importance_floor);
        for token in sets.activating {
            index.activating.entry(token).or_default().insert(id);
        }
        for token in sets.important {
            index.important.entry(token).or_default().insert(id);
        }
    }
    index
}

pub fn search(index: &TokenIndex, query: &SearchQuery) -> Vec<NeuronId> {
    index.search(query)
}
