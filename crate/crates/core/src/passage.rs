//! Passage-level uncertainty: contradiction-weighted calibration over sentence
//! neighbours, plus the positional-neighbour and plain-average variants.

use crate::bundle::PassageBundle;
use crate::config::{IsolatedPolicy, PassageMethod};
use crate::error::ScoreError;
use crate::graph::SemanticGraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageScore {
    pub passage_id: String,
    pub raw_uncertainty: f64,
    pub method: PassageMethod,
}

/// Lookup of NLI(con | premise, hypothesis).
pub trait ContradictionSource {
    fn contradiction(&self, premise: usize, hypothesis: usize) -> Option<f64>;
}

impl ContradictionSource for PassageBundle {
    fn contradiction(&self, premise: usize, hypothesis: usize) -> Option<f64> {
        PassageBundle::contradiction(self, premise, hypothesis)
    }
}

impl<F: Fn(usize, usize) -> Option<f64>> ContradictionSource for F {
    fn contradiction(&self, premise: usize, hypothesis: usize) -> Option<f64> {
        self(premise, hypothesis)
    }
}

/// Positional neighbours `{i - 1, i + 1}` clipped to `1..=m`.
pub fn adjacent_neighbors(i: usize, m: usize) -> BTreeSet<usize> {
    [i.checked_sub(1), Some(i + 1)]
        .into_iter()
        .flatten()
        .filter(|j| (1..=m).contains(j))
        .collect()
}

/// Weighted sum over neighbour sets, divided by the total neighbour count.
/// Returns `None` when no sentence has neighbours. `scores[i - 1]` is U_s(i).
fn neighbor_weighted(
    scores: &[f64],
    neighbor_sets: &[BTreeSet<usize>],
    nli: &dyn ContradictionSource,
) -> Result<Option<f64>, ScoreError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (idx, neighbors) in neighbor_sets.iter().enumerate() {
        let i = idx + 1;
        for &j in neighbors {
            let con = nli
                .contradiction(j, i)
                .ok_or(ScoreError::MissingNli {
                    premise: j,
                    hypothesis: i,
                })?;
            total += scores[idx] * con;
            count += 1;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

pub fn average(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Contradiction-calibrated passage uncertainty over the semantic graph.
///
/// Sentences with no graph neighbours take positional neighbours under
/// `AdjacentFallback` and are left out under `Skip`. A passage with no links
/// at all falls back to the plain average.
pub fn calibrate_graph(
    passage_id: &str,
    graph: &SemanticGraph,
    sentence_scores: &[f64],
    nli: &dyn ContradictionSource,
    policy: IsolatedPolicy,
) -> Result<PassageScore, ScoreError> {
    check_scores(sentence_scores)?;
    let m = sentence_scores.len();
    if !graph.has_edges() {
        return Ok(calibrate_average(passage_id, sentence_scores, PassageMethod::Graph));
    }
    let sets: Vec<BTreeSet<usize>> = (1..=m)
        .map(|i| {
            let own = graph.neighbors_of(i);
            match (own.is_empty(), policy) {
                (true, IsolatedPolicy::AdjacentFallback) => adjacent_neighbors(i, m),
                _ => own.clone(),
            }
        })
        .collect();
    let raw = neighbor_weighted(sentence_scores, &sets, nli)?
        .expect("graph with edges yields at least one neighbour");
    Ok(PassageScore {
        passage_id: passage_id.to_string(),
        raw_uncertainty: raw,
        method: PassageMethod::Graph,
    })
}

/// Same weighting with positional neighbours only.
pub fn calibrate_adjacent(
    passage_id: &str,
    sentence_scores: &[f64],
    nli: &dyn ContradictionSource,
) -> Result<PassageScore, ScoreError> {
    check_scores(sentence_scores)?;
    let m = sentence_scores.len();
    let sets: Vec<BTreeSet<usize>> = (1..=m).map(|i| adjacent_neighbors(i, m)).collect();
    match neighbor_weighted(sentence_scores, &sets, nli)? {
        Some(raw) => Ok(PassageScore {
            passage_id: passage_id.to_string(),
            raw_uncertainty: raw,
            method: PassageMethod::Adjacent,
        }),
        None => Ok(calibrate_average(passage_id, sentence_scores, PassageMethod::Adjacent)),
    }
}

/// Arithmetic mean of the sentence uncertainties. `method` records which
/// variant asked for it (graph and adjacent fall back to this).
pub fn calibrate_average(passage_id: &str, sentence_scores: &[f64], method: PassageMethod) -> PassageScore {
    PassageScore {
        passage_id: passage_id.to_string(),
        raw_uncertainty: average(sentence_scores),
        method,
    }
}

pub fn calibrate(
    method: PassageMethod,
    passage_id: &str,
    graph: &SemanticGraph,
    sentence_scores: &[f64],
    nli: &dyn ContradictionSource,
    policy: IsolatedPolicy,
) -> Result<PassageScore, ScoreError> {
    match method {
        PassageMethod::Graph => calibrate_graph(passage_id, graph, sentence_scores, nli, policy),
        PassageMethod::Adjacent => calibrate_adjacent(passage_id, sentence_scores, nli),
        PassageMethod::Average => {
            check_scores(sentence_scores)?;
            Ok(calibrate_average(passage_id, sentence_scores, PassageMethod::Average))
        }
    }
}

fn check_scores(scores: &[f64]) -> Result<(), ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::Contract("passage has no sentence scores".into()));
    }
    Ok(())
}
