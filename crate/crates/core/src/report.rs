//! End-to-end scoring of bundles into per-passage reports.

use crate::baselines::{score_baselines, BaselineMetric, BaselineScore};
use crate::bundle::PassageBundle;
use crate::config::{Config, PassageMethod, ProjectionKind, SentenceScorer, TokenScorer};
use crate::error::ScoreError;
use crate::eval::{median, project, ProjectionSpec};
use crate::graph::{build_graph, role_warnings};
use crate::passage::calibrate;
use crate::sentence::{score_entities, score_sentences, EntityScore};
use crate::token::{score_tokens, TokenScore};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceReport {
    pub sentence_index: usize,
    pub entity_uncertainty: f64,
    pub global_uncertainty: f64,
    /// Score fed to passage calibration: the interpolated uncertainty, or a
    /// baseline when a substitute sentence scorer is configured.
    pub raw: f64,
    pub projected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageMethodReport {
    pub method: PassageMethod,
    /// `None` when this method could not be computed (see warnings).
    pub raw: Option<f64>,
    pub projected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub passage_id: String,
    pub token_scorer: TokenScorer,
    pub sentence_scorer: SentenceScorer,
    pub primary_method: PassageMethod,
    pub sentence_projection: ProjectionSpec,
    pub tokens: Vec<TokenScore>,
    pub entities: Vec<EntityScore>,
    pub sentences: Vec<SentenceReport>,
    /// Always graph, adjacent and average, in that order.
    pub passage: Vec<PassageMethodReport>,
    pub baselines: Vec<BaselineScore>,
    pub warnings: Vec<String>,
}

impl UncertaintyReport {
    pub fn method(&self, method: PassageMethod) -> Option<&PassageMethodReport> {
        self.passage.iter().find(|p| p.method == method)
    }

    /// Projected score of the configured passage method.
    pub fn primary_projected(&self) -> Option<f64> {
        self.method(self.primary_method).and_then(|p| p.projected)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Unprojected scores of one passage. Projection needs corpus statistics and
/// happens in [`score_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawPassage {
    pub passage_id: String,
    pub tokens: Vec<TokenScore>,
    pub entities: Vec<EntityScore>,
    pub sentences: Vec<(usize, f64, f64, f64)>,
    pub passage: Vec<(PassageMethod, Option<f64>)>,
    pub baselines: Vec<BaselineScore>,
    pub warnings: Vec<String>,
}

/// Scores one bundle. Only a failure of the configured passage method is an
/// error; the other two methods are reported as missing with a warning.
pub fn score_passage(bundle: &PassageBundle, config: &Config) -> Result<RawPassage, ScoreError> {
    let mut warnings = role_warnings(bundle);
    let graph = build_graph(bundle);
    let tokens = score_tokens(bundle, config.token_scorer, &mut warnings)?;
    let entities = score_entities(bundle, &graph, &tokens, &mut warnings)?;
    let interpolated = score_sentences(
        bundle,
        &tokens,
        &entities,
        config.alpha,
        config.beta,
        config.lambda,
    )?;
    let baselines = score_baselines(bundle, &mut warnings)?;
    let substitute = BaselineMetric::from_sentence_scorer(config.sentence_scorer);
    let sentences: Vec<(usize, f64, f64, f64)> = interpolated
        .iter()
        .map(|s| {
            let raw = match substitute {
                None => s.sentence_uncertainty,
                Some(metric) => baselines
                    .iter()
                    .find(|b| b.sentence_index == s.sentence_index && b.metric == metric)
                    .map(|b| b.value)
                    .expect("every sentence has every baseline"),
            };
            (s.sentence_index, s.entity_uncertainty, s.global_uncertainty, raw)
        })
        .collect();
    let raw_scores: Vec<f64> = sentences.iter().map(|s| s.3).collect();
    let mut passage = Vec::with_capacity(PassageMethod::ALL.len());
    for &method in PassageMethod::ALL {
        match calibrate(
            method,
            &bundle.passage_id,
            &graph,
            &raw_scores,
            bundle,
            config.isolated_sentence_policy,
        ) {
            Ok(score) => passage.push((method, Some(score.raw_uncertainty))),
            Err(e) if method != config.passage_method => {
                warnings.push(format!("passage method {method} unavailable: {e}"));
                passage.push((method, None));
            }
            Err(e) => return Err(e),
        }
    }
    let mut seen = std::collections::HashSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    Ok(RawPassage {
        passage_id: bundle.passage_id.clone(),
        tokens,
        entities,
        sentences,
        passage,
        baselines,
        warnings,
    })
}

/// Projection for a score family, with the logistic location defaulting to
/// the median of `values`.
pub fn projection_for(kind: ProjectionKind, config: &Config, values: &[f64]) -> ProjectionSpec {
    match kind {
        ProjectionKind::Logistic => ProjectionSpec::logistic(
            config
                .logistic_mu
                .or_else(|| median(values))
                .unwrap_or(0.0),
            config.logistic_tau,
        ),
        other => ProjectionSpec::new(other),
    }
}

/// Projects raw passages into reports. The logistic location for sentences is
/// the median over all sentence scores; for passages it is the median of each
/// method's scores.
pub fn project_corpus(raw: Vec<RawPassage>, config: &Config) -> Vec<UncertaintyReport> {
    let sentence_values: Vec<f64> = raw
        .iter()
        .flat_map(|p| p.sentences.iter().map(|s| s.3))
        .collect();
    let sentence_spec = projection_for(config.sentence_projection, config, &sentence_values);
    let passage_specs: Vec<(PassageMethod, ProjectionSpec)> = PassageMethod::ALL
        .iter()
        .map(|&method| {
            let values: Vec<f64> = raw
                .iter()
                .filter_map(|p| p.passage.iter().find(|(m, _)| *m == method).and_then(|(_, v)| *v))
                .collect();
            (method, projection_for(config.passage_projection, config, &values))
        })
        .collect();
    raw.into_iter()
        .map(|p| UncertaintyReport {
            passage_id: p.passage_id,
            token_scorer: config.token_scorer,
            sentence_scorer: config.sentence_scorer,
            primary_method: config.passage_method,
            sentence_projection: sentence_spec,
            tokens: p.tokens,
            entities: p.entities,
            sentences: p
                .sentences
                .into_iter()
                .map(|(sentence_index, e, g, raw)| SentenceReport {
                    sentence_index,
                    entity_uncertainty: e,
                    global_uncertainty: g,
                    raw,
                    projected: project(raw, &sentence_spec),
                })
                .collect(),
            passage: p
                .passage
                .into_iter()
                .map(|(method, raw)| {
                    let spec = passage_specs
                        .iter()
                        .find(|(m, _)| *m == method)
                        .map(|(_, s)| s)
                        .expect("spec for every method");
                    PassageMethodReport {
                        method,
                        raw,
                        projected: raw.map(|r| project(r, spec)),
                    }
                })
                .collect(),
            baselines: p.baselines,
            warnings: p.warnings,
        })
        .collect()
}

/// Error from scoring a corpus, tagged with the offending passage.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusError {
    pub passage_index: usize,
    pub passage_id: String,
    pub error: ScoreError,
}

impl std::fmt::Display for CorpusError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "passage {} (`{}`): {}", self.passage_index + 1, self.passage_id, self.error)
    }
}

impl std::error::Error for CorpusError {}

pub fn score_corpus(
    bundles: &[PassageBundle],
    config: &Config,
) -> Result<Vec<UncertaintyReport>, CorpusError> {
    let raw = bundles
        .iter()
        .enumerate()
        .map(|(idx, b)| {
            score_passage(b, config).map_err(|error| CorpusError {
                passage_index: idx,
                passage_id: b.passage_id.clone(),
                error,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(project_corpus(raw, config))
}
