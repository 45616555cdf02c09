//! Sentence-level uncertainty.
//!
//! Each object entity receives uncertainty from the subjects of its incoming
//! triples, weighted by subject-object attention over the relation intensity.
//! Entity uncertainties are averaged per sentence and interpolated with an
//! alpha-quantile of all token uncertainties in the sentence.

use crate::bundle::{EntitySpan, PassageBundle, TokenRef, Triple};
use crate::error::ScoreError;
use crate::graph::SemanticGraph;
use crate::token::TokenScore;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Lower bound substituted for a vanishing relation intensity.
pub const INTENSITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub entity_id: String,
    pub sentence_index: usize,
    pub self_uncertainty: f64,
    pub propagated_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub sentence_index: usize,
    pub entity_uncertainty: f64,
    pub global_uncertainty: f64,
    pub sentence_uncertainty: f64,
}

/// Mean token uncertainty over an entity span.
pub fn entity_self_uncertainty(
    span: &EntitySpan,
    token_scores: &HashMap<TokenRef, f64>,
) -> Result<f64, ScoreError> {
    if span.token_range.is_empty() {
        return Err(ScoreError::Contract(format!(
            "entity `{}` has an empty token range",
            span.entity_id
        )));
    }
    let mut sum = 0.0;
    for j in span.token_range.indices() {
        let key = TokenRef {
            sentence_index: span.sentence_index,
            within_sentence_index: j,
        };
        sum += token_scores.get(&key).ok_or_else(|| {
            ScoreError::Contract(format!(
                "entity `{}` covers unscored token ({}, {j})",
                span.entity_id, span.sentence_index
            ))
        })?;
    }
    Ok(sum / span.token_range.len() as f64)
}

/// Mean over incoming triples of the subject-relation / relation-object
/// attention average.
pub fn relation_intensity(incoming: &[Triple]) -> f64 {
    if incoming.is_empty() {
        return 0.0;
    }
    let total: f64 = incoming
        .iter()
        .map(|t| (t.att_subject_relation + t.att_relation_object) / 2.0)
        .sum();
    total / incoming.len() as f64
}

/// Uncertainty pushed into `object` from its subjects' self-uncertainty.
///
/// Single hop: subjects contribute their own score, never their propagated one.
pub fn propagated_uncertainty(
    object: &str,
    graph: &SemanticGraph,
    self_uncertainty: &HashMap<String, f64>,
    warnings: &mut Vec<String>,
) -> Result<f64, ScoreError> {
    let incoming = graph.incoming(object);
    if incoming.is_empty() {
        return Ok(0.0);
    }
    let mut intensity = relation_intensity(incoming);
    if intensity < INTENSITY_EPSILON {
        warnings.push(format!(
            "entity `{object}`: relation intensity {intensity:e} raised to {INTENSITY_EPSILON:e}"
        ));
        intensity = INTENSITY_EPSILON;
    }
    let mut total = 0.0;
    for t in incoming {
        let subject = self_uncertainty.get(&t.subject).ok_or_else(|| {
            ScoreError::Contract(format!("subject `{}` was not scored", t.subject))
        })?;
        total += t.att_subject_object / intensity * subject;
    }
    Ok(total)
}

/// Mean of `self + beta * propagated` over the sentence's entities, or `None`
/// when the sentence has none.
pub fn entity_uncertainty(entities: &[&EntityScore], beta: f64) -> Option<f64> {
    if entities.is_empty() {
        return None;
    }
    let total: f64 = entities
        .iter()
        .map(|e| e.self_uncertainty + beta * e.propagated_uncertainty)
        .sum();
    Some(total / entities.len() as f64)
}

/// Alpha-quantile with linear interpolation between order statistics:
/// `h = (n - 1) * alpha`, interpolating `x[floor(h)]` toward `x[floor(h) + 1]`.
pub fn quantile(values: &[f64], alpha: f64) -> Result<f64, ScoreError> {
    if values.is_empty() {
        return Err(ScoreError::Contract("quantile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ScoreError::Contract(format!(
            "quantile level {alpha} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

pub fn global_uncertainty(token_uncertainties: &[f64], alpha: f64) -> Result<f64, ScoreError> {
    quantile(token_uncertainties, alpha)
}

pub fn sentence_uncertainty(entity: f64, global: f64, lambda: f64) -> f64 {
    lambda * entity + (1.0 - lambda) * global
}

/// Entity scores for every entity of the bundle, in bundle order.
pub fn score_entities(
    bundle: &PassageBundle,
    graph: &SemanticGraph,
    tokens: &[TokenScore],
    warnings: &mut Vec<String>,
) -> Result<Vec<EntityScore>, ScoreError> {
    let by_ref: HashMap<TokenRef, f64> = tokens
        .iter()
        .map(|t| {
            (
                TokenRef {
                    sentence_index: t.sentence_index,
                    within_sentence_index: t.within_sentence_index,
                },
                t.uncertainty,
            )
        })
        .collect();
    let mut self_scores = HashMap::with_capacity(bundle.entities.len());
    for e in &bundle.entities {
        self_scores.insert(e.entity_id.clone(), entity_self_uncertainty(e, &by_ref)?);
    }
    bundle
        .entities
        .iter()
        .map(|e| {
            Ok(EntityScore {
                entity_id: e.entity_id.clone(),
                sentence_index: e.sentence_index,
                self_uncertainty: self_scores[&e.entity_id],
                propagated_uncertainty: propagated_uncertainty(
                    &e.entity_id,
                    graph,
                    &self_scores,
                    warnings,
                )?,
            })
        })
        .collect()
}

/// Sentence scores in sentence order. Sentences without entities use their
/// global uncertainty as the entity term.
pub fn score_sentences(
    bundle: &PassageBundle,
    tokens: &[TokenScore],
    entities: &[EntityScore],
    alpha: f64,
    beta: f64,
    lambda: f64,
) -> Result<Vec<SentenceScore>, ScoreError> {
    (1..=bundle.sentence_count())
        .map(|i| {
            let values: Vec<f64> = tokens
                .iter()
                .filter(|t| t.sentence_index == i)
                .map(|t| t.uncertainty)
                .collect();
            let global = global_uncertainty(&values, alpha)?;
            let members: Vec<&EntityScore> =
                entities.iter().filter(|e| e.sentence_index == i).collect();
            let entity = entity_uncertainty(&members, beta).unwrap_or(global);
            Ok(SentenceScore {
                sentence_index: i,
                entity_uncertainty: entity,
                global_uncertainty: global,
                sentence_uncertainty: sentence_uncertainty(entity, global, lambda),
            })
        })
        .collect()
}
