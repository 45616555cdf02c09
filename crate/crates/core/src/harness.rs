//! Corpus evaluation against sentence labels and human passage scores, and
//! one-at-a-time hyperparameter sweeps.

use crate::baselines::BaselineMetric;
use crate::bundle::PassageBundle;
use crate::config::{AucKind, Config, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_K, DEFAULT_LAMBDA};
use crate::error::EvalError;
use crate::eval::{auc, map_labels, pearson, project, spearman, Setup};
use crate::report::{projection_for, score_corpus, CorpusError, UncertaintyReport};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `interpolated` or a baseline metric name.
    pub method: String,
    pub auc: AucKind,
    pub auc_nonfact: Option<f64>,
    pub auc_nonfact_star: Option<f64>,
    pub auc_factual: Option<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub n_sentences: usize,
    pub n_passages: usize,
    /// Why any metric above is missing.
    pub notes: Vec<String>,
}

/// Projected scores paired with gold values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scored {
    /// (projected sentence score, label in {0, 0.5, 1})
    pub sentences: Vec<(f64, f64)>,
    /// (projected passage score, human score)
    pub passages: Vec<(f64, f64)>,
}

/// Computes the three AUCs and both correlations. Undefined metrics become
/// `None` with a note; invalid labels are an error.
pub fn evaluate(method: &str, scored: &Scored, kind: AucKind) -> Result<EvalResult, EvalError> {
    let mut notes = Vec::new();
    let scores: Vec<f64> = scored.sentences.iter().map(|s| s.0).collect();
    let labels: Vec<f64> = scored.sentences.iter().map(|s| s.1).collect();
    let mut aucs = [None; 3];
    for (slot, setup) in aucs.iter_mut().zip(Setup::ALL) {
        let (binary, orientation) = map_labels(setup, &labels)?;
        let oriented: Vec<f64> = scores.iter().map(|&s| orientation.apply(s)).collect();
        match auc(kind, &oriented, &binary) {
            Ok(v) => *slot = Some(v),
            Err(e) => notes.push(format!("{setup} AUC: {e}")),
        }
    }
    let xs: Vec<f64> = scored.passages.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = scored.passages.iter().map(|p| p.1).collect();
    let pearson = pearson(&xs, &ys)
        .map_err(|e| notes.push(format!("pearson: {e}")))
        .ok();
    let spearman = spearman(&xs, &ys)
        .map_err(|e| notes.push(format!("spearman: {e}")))
        .ok();
    Ok(EvalResult {
        method: method.to_string(),
        auc: kind,
        auc_nonfact: aucs[0],
        auc_nonfact_star: aucs[1],
        auc_factual: aucs[2],
        pearson,
        spearman,
        n_sentences: scored.sentences.len(),
        n_passages: scored.passages.len(),
        notes,
    })
}

/// Pairs each report with its bundle by passage id.
fn pair<'a>(
    reports: &'a [UncertaintyReport],
    bundles: &'a [PassageBundle],
) -> Result<Vec<(&'a UncertaintyReport, &'a PassageBundle)>, EvalError> {
    let by_id: HashMap<&str, &PassageBundle> =
        bundles.iter().map(|b| (b.passage_id.as_str(), b)).collect();
    reports
        .iter()
        .map(|r| {
            let b = by_id.get(r.passage_id.as_str()).ok_or_else(|| {
                EvalError::Mismatch(format!("no bundle for passage `{}`", r.passage_id))
            })?;
            if b.sentence_count() != r.sentences.len() {
                return Err(EvalError::Mismatch(format!(
                    "passage `{}` has {} sentences in the bundle and {} in the report",
                    r.passage_id,
                    b.sentence_count(),
                    r.sentences.len()
                )));
            }
            Ok((r, *b))
        })
        .collect()
}

fn has_labels(pairs: &[(&UncertaintyReport, &PassageBundle)]) -> bool {
    pairs
        .iter()
        .any(|(_, b)| b.sentence_labels.is_some() || b.passage_human_score.is_some())
}

/// Gold-paired projected scores of the configured method, read from reports.
pub fn scored_from_reports(
    reports: &[UncertaintyReport],
    bundles: &[PassageBundle],
) -> Result<Scored, EvalError> {
    let pairs = pair(reports, bundles)?;
    if !has_labels(&pairs) {
        return Err(EvalError::Unlabeled);
    }
    let mut scored = Scored::default();
    for (r, b) in pairs {
        if let Some(labels) = &b.sentence_labels {
            scored
                .sentences
                .extend(r.sentences.iter().zip(labels).map(|(s, l)| (s.projected, *l)));
        }
        if let (Some(human), Some(p)) = (b.passage_human_score, r.primary_projected()) {
            scored.passages.push((p, human));
        }
    }
    Ok(scored)
}

/// Gold-paired scores of a sentence baseline. Sentence values are projected
/// with the configured sentence projection; the passage value is the mean of
/// the sentence values, projected with the passage projection.
pub fn scored_baseline(
    metric: BaselineMetric,
    reports: &[UncertaintyReport],
    bundles: &[PassageBundle],
    config: &Config,
) -> Result<Scored, EvalError> {
    let pairs = pair(reports, bundles)?;
    if !has_labels(&pairs) {
        return Err(EvalError::Unlabeled);
    }
    let per_passage: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(r, _)| {
            r.baselines
                .iter()
                .filter(|b| b.metric == metric)
                .map(|b| b.value)
                .collect()
        })
        .collect();
    let all: Vec<f64> = per_passage.iter().flatten().copied().collect();
    let means: Vec<f64> = per_passage
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let sentence_spec = projection_for(config.sentence_projection, config, &all);
    let passage_spec = projection_for(config.passage_projection, config, &means);
    let mut scored = Scored::default();
    for ((values, mean), (_, b)) in per_passage.iter().zip(&means).zip(&pairs) {
        if let Some(labels) = &b.sentence_labels {
            scored.sentences.extend(
                values
                    .iter()
                    .zip(labels)
                    .map(|(v, l)| (project(*v, &sentence_spec), *l)),
            );
        }
        if let Some(human) = b.passage_human_score {
            scored.passages.push((project(*mean, &passage_spec), human));
        }
    }
    Ok(scored)
}

/// Evaluates the reports' configured method followed by each requested baseline.
pub fn evaluate_reports(
    reports: &[UncertaintyReport],
    bundles: &[PassageBundle],
    config: &Config,
    baselines: &[BaselineMetric],
) -> Result<Vec<EvalResult>, EvalError> {
    let method = reports
        .first()
        .map(|r| match BaselineMetric::from_sentence_scorer(r.sentence_scorer) {
            Some(m) => m.as_str().to_string(),
            None => format!("interpolated/{}", r.primary_method),
        })
        .unwrap_or_else(|| "interpolated".to_string());
    let mut out = vec![evaluate(
        &method,
        &scored_from_reports(reports, bundles)?,
        config.auc,
    )?];
    for &metric in baselines {
        out.push(evaluate(
            metric.as_str(),
            &scored_baseline(metric, reports, bundles, config)?,
            config.auc,
        )?);
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{:.4}", x)).unwrap_or_else(|| "-".into())
}

/// Aligned plain-text table, one row per result.
pub fn format_table(results: &[EvalResult]) -> String {
    let header = [
        "method",
        "auc",
        "NonFact",
        "NonFact*",
        "Factual",
        "pearson",
        "spearman",
    ];
    let rows: Vec<[String; 7]> = results
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.auc.to_string(),
                cell(r.auc_nonfact),
                cell(r.auc_nonfact_star),
                cell(r.auc_factual),
                cell(r.pearson),
                cell(r.spearman),
            ]
        })
        .collect();
    render(&header, &rows)
}

fn render<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths = header.map(str::len);
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Beta,
    Lambda,
    K,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::Lambda,
        SweepParam::K,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Lambda => "lambda",
            SweepParam::K => "k",
        }
    }

    /// The grid used when none is given on the command line.
    pub fn default_grid(self) -> Vec<f64> {
        let steps = |start: u32, end: u32, div: f64| (start..=end).map(|i| i as f64 / div).collect();
        match self {
            SweepParam::Alpha => steps(0, 10, 10.0),
            SweepParam::Beta => steps(1, 19, 20.0),
            SweepParam::Lambda => steps(1, 9, 10.0),
            SweepParam::K => vec![1.0, 3.0, 5.0, 7.0],
        }
    }

    pub fn apply(self, config: &mut Config, value: f64) {
        match self {
            SweepParam::Alpha => config.alpha = value,
            SweepParam::Beta => config.beta = value,
            SweepParam::Lambda => config.lambda = value,
            SweepParam::K => config.k = value as usize,
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown sweep parameter `{s}` (expected alpha, beta, lambda or k)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub k: usize,
    /// The grid point sits at the tuned defaults.
    pub is_default: bool,
    /// Mean global (quantile) sentence uncertainty over the corpus.
    pub mean_global_uncertainty: f64,
    pub result: EvalResult,
}

#[derive(Debug)]
pub enum SweepError {
    Score(CorpusError),
    Eval(EvalError),
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepError::Score(e) => e.fmt(f),
            SweepError::Eval(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for SweepError {}

/// Smallest top-k length stored in the corpus.
pub fn stored_k(bundles: &[PassageBundle]) -> Option<usize> {
    bundles
        .iter()
        .flat_map(|b| b.tokens.iter().map(|t| t.topk_probs.len()))
        .min()
}

/// Runs score + evaluate once per grid value, varying one parameter at a time
/// around `base`. A `k` larger than the stored top-k is skipped with a warning.
pub fn sweep(
    bundles: &[PassageBundle],
    base: &Config,
    grid: &[(SweepParam, Vec<f64>)],
    warnings: &mut Vec<String>,
) -> Result<Vec<SweepRow>, SweepError> {
    let available = stored_k(bundles).unwrap_or(0);
    let mut rows = Vec::new();
    for (param, values) in grid {
        for &value in values {
            let mut config = base.clone();
            param.apply(&mut config, value);
            let truncated: Vec<PassageBundle>;
            let corpus = if *param == SweepParam::K {
                if config.k > available || config.k == 0 {
                    warnings.push(format!(
                        "k = {} skipped: bundles store {available} probabilities per token",
                        config.k
                    ));
                    continue;
                }
                truncated = bundles.iter().map(|b| b.truncated_to_k(config.k)).collect();
                &truncated
            } else {
                bundles
            };
            let reports = score_corpus(corpus, &config).map_err(SweepError::Score)?;
            let scored = scored_from_reports(&reports, corpus).map_err(SweepError::Eval)?;
            let result = evaluate(&format!("{param}={value}"), &scored, config.auc)
                .map_err(SweepError::Eval)?;
            let globals: Vec<f64> = reports
                .iter()
                .flat_map(|r| r.sentences.iter().map(|s| s.global_uncertainty))
                .collect();
            rows.push(SweepRow {
                param: *param,
                value,
                alpha: config.alpha,
                beta: config.beta,
                lambda: config.lambda,
                k: config.k,
                is_default: config.alpha == DEFAULT_ALPHA
                    && config.beta == DEFAULT_BETA
                    && config.lambda == DEFAULT_LAMBDA
                    && config.k == DEFAULT_K,
                mean_global_uncertainty: globals.iter().sum::<f64>() / globals.len().max(1) as f64,
                result,
            });
        }
    }
    Ok(rows)
}

pub fn format_sweep_table(rows: &[SweepRow]) -> String {
    let header = [
        "param", "value", "U_G", "NonFact", "NonFact*", "Factual", "pearson", "spearman", "default",
    ];
    let cells: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.param.to_string(),
                format!("{}", r.value),
                format!("{:.4}", r.mean_global_uncertainty),
                cell(r.result.auc_nonfact),
                cell(r.result.auc_nonfact_star),
                cell(r.result.auc_factual),
                cell(r.result.pearson),
                cell(r.result.spearman),
                if r.is_default { "*".into() } else { String::new() },
            ]
        })
        .collect();
    render(&header, &cells)
}
