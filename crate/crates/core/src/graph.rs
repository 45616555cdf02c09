//! Passage-level semantic graph: intra-sentence triples plus sentence adjacency.

use crate::bundle::{PassageBundle, Triple};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Part-of-speech tags accepted for subject and object tokens.
pub const ENTITY_POS_TAGS: &[&str] = &["NOUN", "NUM", "PROPN"];

/// Named-entity types accepted for subject and object tokens.
pub const ENTITY_NER_TYPES: &[&str] = &[
    "PERSON",
    "DATE",
    "ORG",
    "GPE",
    "NORP",
    "ORDINAL",
    "PRODUCT",
    "CARDINAL",
    "LOC",
    "FAC",
    "EVENT",
    "WORK_OF_ART",
    "LAW",
    "LANGUAGE",
    "TIME",
    "PERCENT",
    "MONEY",
    "QUANTITY",
];

pub const RELATION_POS_TAG: &str = "VERB";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticGraph {
    /// Sentence count `m`; every index in `1..=m` has an entry in `neighbors`.
    pub sentence_count: usize,
    pub triples_by_sentence: BTreeMap<usize, Vec<Triple>>,
    pub incoming_by_object: BTreeMap<String, Vec<Triple>>,
    pub neighbors: BTreeMap<usize, BTreeSet<usize>>,
}

impl SemanticGraph {
    pub fn neighbors_of(&self, sentence: usize) -> &BTreeSet<usize> {
        static EMPTY: BTreeSet<usize> = BTreeSet::new();
        self.neighbors.get(&sentence).unwrap_or(&EMPTY)
    }

    pub fn incoming(&self, object: &str) -> &[Triple] {
        self.incoming_by_object
            .get(object)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of distinct undirected sentence edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edges(&self) -> bool {
        self.neighbors.values().any(|n| !n.is_empty())
    }

    pub fn dump(&self, passage_id: &str) -> GraphDump {
        GraphDump {
            passage_id: passage_id.to_string(),
            sentence_count: self.sentence_count,
            edge_count: self.edge_count(),
            neighbors: self
                .neighbors
                .iter()
                .map(|(k, v)| (*k, v.iter().copied().collect()))
                .collect(),
            triples_per_sentence: self
                .triples_by_sentence
                .iter()
                .map(|(k, v)| (*k, v.len()))
                .collect(),
            incoming_per_object: self
                .incoming_by_object
                .iter()
                .map(|(k, v)| (k.clone(), v.len()))
                .collect(),
        }
    }
}

/// Debug view of a graph: adjacency and triple counts.
#[derive(Debug, Clone, Serialize)]
pub struct GraphDump {
    pub passage_id: String,
    pub sentence_count: usize,
    pub edge_count: usize,
    pub neighbors: BTreeMap<usize, Vec<usize>>,
    pub triples_per_sentence: BTreeMap<usize, usize>,
    pub incoming_per_object: BTreeMap<String, usize>,
}

fn triple_key(t: &Triple) -> impl Ord + '_ {
    (
        t.subject.as_str(),
        t.object.as_str(),
        t.relation_token.sentence_index,
        t.relation_token.within_sentence_index,
        t.att_subject_object.to_bits(),
        t.att_subject_relation.to_bits(),
        t.att_relation_object.to_bits(),
    )
}

/// Builds the graph of a validated bundle.
///
/// Triple lists are kept in a canonical order so that permuting the input
/// yields an identical graph. Duplicate links collapse to one edge.
pub fn build_graph(bundle: &PassageBundle) -> SemanticGraph {
    let m = bundle.sentence_count();
    let mut graph = SemanticGraph {
        sentence_count: m,
        neighbors: (1..=m).map(|i| (i, BTreeSet::new())).collect(),
        ..SemanticGraph::default()
    };
    for link in &bundle.links {
        let (a, b) = (link.sentence_a, link.sentence_b);
        if a == b || !(1..=m).contains(&a) || !(1..=m).contains(&b) {
            continue;
        }
        graph.neighbors.entry(a).or_default().insert(b);
        graph.neighbors.entry(b).or_default().insert(a);
    }
    for triple in &bundle.triples {
        graph
            .triples_by_sentence
            .entry(triple.relation_token.sentence_index)
            .or_default()
            .push(triple.clone());
        graph
            .incoming_by_object
            .entry(triple.object.clone())
            .or_default()
            .push(triple.clone());
    }
    for list in graph
        .triples_by_sentence
        .values_mut()
        .chain(graph.incoming_by_object.values_mut())
    {
        list.sort_by(|a, b| triple_key(a).cmp(&triple_key(b)));
    }
    graph
}

fn is_entity_token(pos: Option<&str>, ner: Option<&str>) -> bool {
    pos.is_some_and(|p| ENTITY_POS_TAGS.contains(&p))
        || ner.is_some_and(|n| ENTITY_NER_TYPES.contains(&n))
}

/// True when subject and object tokens are all noun-like (by POS or NER) and the
/// relation token is a verb. Unresolvable references count as failures.
pub fn check_triple_roles(triple: &Triple, bundle: &PassageBundle) -> bool {
    let index = bundle.token_index();
    let entity_ok = |id: &str| {
        let Some(span) = bundle.entity(id) else {
            return false;
        };
        !span.token_range.is_empty()
            && span.token_range.indices().all(|j| {
                index
                    .get(&crate::bundle::TokenRef {
                        sentence_index: span.sentence_index,
                        within_sentence_index: j,
                    })
                    .map(|&n| &bundle.tokens[n])
                    .is_some_and(|t| is_entity_token(t.pos_tag.as_deref(), t.ner_type.as_deref()))
            })
    };
    let relation_ok = index
        .get(&triple.relation_token)
        .map(|&n| &bundle.tokens[n])
        .is_some_and(|t| t.pos_tag.as_deref() == Some(RELATION_POS_TAG));
    relation_ok && entity_ok(&triple.subject) && entity_ok(&triple.object)
}

/// Advisory warnings for every triple failing the role rules.
pub fn role_warnings(bundle: &PassageBundle) -> Vec<String> {
    bundle
        .triples
        .iter()
        .enumerate()
        .filter(|(_, t)| !check_triple_roles(t, bundle))
        .map(|(n, t)| {
            format!(
                "triples[{n}] ({} -> {}) fails role rules: entities must be NOUN/NUM/PROPN or a named-entity type, relation must be VERB",
                t.subject, t.object
            )
        })
        .collect()
}
