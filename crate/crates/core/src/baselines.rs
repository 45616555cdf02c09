//! Probability baselines: negative log probability and top-k entropy, averaged
//! or maximised over a sentence.

use crate::bundle::{PassageBundle, TokenRecord};
use crate::config::SentenceScorer;
use crate::error::ScoreError;
use crate::token::neg_log_prob;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMetric {
    AvgNegLogprob,
    MaxNegLogprob,
    AvgEntropy,
    MaxEntropy,
    /// Token-level `-ln p`; used as a stand-in for the statistical token score.
    VanillaLogprobToken,
}

impl BaselineMetric {
    /// Sentence-level metrics, in the order they are reported.
    pub const SENTENCE: [BaselineMetric; 4] = [
        BaselineMetric::AvgNegLogprob,
        BaselineMetric::AvgEntropy,
        BaselineMetric::MaxNegLogprob,
        BaselineMetric::MaxEntropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMetric::AvgNegLogprob => "avg_neg_logprob",
            BaselineMetric::MaxNegLogprob => "max_neg_logprob",
            BaselineMetric::AvgEntropy => "avg_entropy",
            BaselineMetric::MaxEntropy => "max_entropy",
            BaselineMetric::VanillaLogprobToken => "vanilla_logprob_token",
        }
    }

    /// The sentence scorer that substitutes this metric, if any.
    pub fn sentence_scorer(self) -> Option<SentenceScorer> {
        match self {
            BaselineMetric::AvgNegLogprob => Some(SentenceScorer::AvgNegLogprob),
            BaselineMetric::MaxNegLogprob => Some(SentenceScorer::MaxNegLogprob),
            BaselineMetric::AvgEntropy => Some(SentenceScorer::AvgEntropy),
            BaselineMetric::MaxEntropy => Some(SentenceScorer::MaxEntropy),
            BaselineMetric::VanillaLogprobToken => None,
        }
    }

    pub fn from_sentence_scorer(scorer: SentenceScorer) -> Option<Self> {
        match scorer {
            SentenceScorer::Interpolated => None,
            SentenceScorer::AvgNegLogprob => Some(BaselineMetric::AvgNegLogprob),
            SentenceScorer::MaxNegLogprob => Some(BaselineMetric::MaxNegLogprob),
            SentenceScorer::AvgEntropy => Some(BaselineMetric::AvgEntropy),
            SentenceScorer::MaxEntropy => Some(BaselineMetric::MaxEntropy),
        }
    }
}

impl fmt::Display for BaselineMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            BaselineMetric::AvgNegLogprob,
            BaselineMetric::MaxNegLogprob,
            BaselineMetric::AvgEntropy,
            BaselineMetric::MaxEntropy,
            BaselineMetric::VanillaLogprobToken,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown baseline metric `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScore {
    pub sentence_index: usize,
    pub metric: BaselineMetric,
    pub value: f64,
}

/// Entropy in nats of the stored top-k probabilities, without renormalising.
pub fn topk_entropy(topk: &[f64]) -> f64 {
    topk.iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `-ln(realized_prob)` for one token. Zero probabilities are floored and
/// reported through `warnings`.
pub fn token_baseline_vanilla(token: &TokenRecord, warnings: &mut Vec<String>) -> f64 {
    let (value, clamped) = neg_log_prob(token.realized_prob);
    if clamped {
        warnings.push(format!(
            "token ({}, {}): realized_prob 0 clamped",
            token.sentence_index, token.within_sentence_index
        ));
    }
    value
}

/// A sentence-level baseline over the given tokens.
pub fn sentence_baseline(
    metric: BaselineMetric,
    tokens: &[&TokenRecord],
    warnings: &mut Vec<String>,
) -> Result<f64, ScoreError> {
    if tokens.is_empty() {
        return Err(ScoreError::Contract("baseline over an empty sentence".into()));
    }
    let values: Vec<f64> = match metric {
        BaselineMetric::AvgNegLogprob | BaselineMetric::MaxNegLogprob => tokens
            .iter()
            .map(|t| token_baseline_vanilla(t, warnings))
            .collect(),
        BaselineMetric::AvgEntropy | BaselineMetric::MaxEntropy => {
            tokens.iter().map(|t| topk_entropy(&t.topk_probs)).collect()
        }
        BaselineMetric::VanillaLogprobToken => {
            return Err(ScoreError::Contract(
                "vanilla_logprob_token is a token-level metric".into(),
            ))
        }
    };
    Ok(match metric {
        BaselineMetric::AvgNegLogprob | BaselineMetric::AvgEntropy => {
            values.iter().sum::<f64>() / values.len() as f64
        }
        _ => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Every sentence-level baseline for every sentence of the bundle.
pub fn score_baselines(
    bundle: &PassageBundle,
    warnings: &mut Vec<String>,
) -> Result<Vec<BaselineScore>, ScoreError> {
    let mut out = Vec::with_capacity(bundle.sentence_count() * 4);
    for i in 1..=bundle.sentence_count() {
        let tokens: Vec<&TokenRecord> = bundle.sentence_tokens(i).collect();
        for metric in BaselineMetric::SENTENCE {
            out.push(BaselineScore {
                sentence_index: i,
                metric,
                value: sentence_baseline(metric, &tokens, warnings)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn token(realized: f64, topk: Vec<f64>) -> TokenRecord {
        TokenRecord {
            surface: "x".into(),
            sentence_index: 1,
            within_sentence_index: 1,
            passage_position: 1,
            topk_probs: topk,
            realized_prob: realized,
            pos_tag: None,
            ner_type: None,
        }
    }

    #[test]
    fn neg_logprob_avg_and_max() {
        let a = token(1.0, vec![1.0, 0.0, 0.0]);
        let b = token((-1.0f64).exp(), vec![0.5, 0.2, 0.1]);
        let mut w = vec![];
        let avg = sentence_baseline(BaselineMetric::AvgNegLogprob, &[&a, &b], &mut w).unwrap();
        let max = sentence_baseline(BaselineMetric::MaxNegLogprob, &[&a, &b], &mut w).unwrap();
        assert!((avg - 0.5).abs() < 1e-12);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(w.is_empty());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(topk_entropy(&[1.0, 0.0, 0.0]), 0.0);
        // -(0.5 ln 0.5 + 2 * 0.25 ln 0.25) = 1.5 ln 2
        let h = topk_entropy(&[0.5, 0.25, 0.25]);
        assert!((h - 1.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((h - 1.03972).abs() < 1e-5);
    }

    #[test]
    fn vanilla_token_values() {
        let mut w = vec![];
        assert_eq!(token_baseline_vanilla(&token(1.0, vec![1.0]), &mut w), 0.0);
        let v = token_baseline_vanilla(&token((-2.0f64).exp(), vec![0.5]), &mut w);
        assert!((v - 2.0).abs() < 1e-12);
        token_baseline_vanilla(&token(0.0, vec![0.5]), &mut w);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn metric_names() {
        for m in BaselineMetric::SENTENCE {
            assert_eq!(m.as_str().parse::<BaselineMetric>().unwrap(), m);
            let scorer = m.sentence_scorer().unwrap();
            assert_eq!(BaselineMetric::from_sentence_scorer(scorer), Some(m));
        }
        assert_eq!(
            serde_json::to_string(&BaselineMetric::VanillaLogprobToken).unwrap(),
            "\"vanilla_logprob_token\""
        );
    }

    fn topk() -> impl Strategy<Value = Vec<f64>> {
        (1usize..7).prop_flat_map(|k| {
            prop::collection::vec(0.001f64..1.0, k + 1).prop_map(move |raw| {
                let total: f64 = raw.iter().sum();
                let mut p: Vec<f64> = raw[..k].iter().map(|x| x / total).collect();
                p.sort_by(|a, b| b.total_cmp(a));
                p
            })
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_log_k(raw in prop::collection::vec(0.001f64..1.0, 1..8), p in topk()) {
            // Full-mass lists obey the bound for any k; with missing mass it
            // still holds once k >= 3 (s ln(k/s) is increasing on (0, 1]).
            let total: f64 = raw.iter().sum();
            let full: Vec<f64> = raw.iter().map(|x| x / total).collect();
            prop_assert!(topk_entropy(&full) <= (full.len() as f64).ln() + 1e-12);
            if p.len() >= 3 {
                prop_assert!(topk_entropy(&p) <= (p.len() as f64).ln() + 1e-12);
            }
        }

        #[test]
        fn uniform_attains_log_k(k in 1usize..10) {
            let p = vec![1.0 / k as f64; k];
            prop_assert!((topk_entropy(&p) - (k as f64).ln()).abs() < 1e-12);
        }

        #[test]
        fn max_dominates_avg_and_order_free(rows in prop::collection::vec((0.001f64..1.0, topk()), 1..8)) {
            let tokens: Vec<TokenRecord> = rows.iter().map(|(r, p)| token(r * p[0], p.clone())).collect();
            let refs: Vec<&TokenRecord> = tokens.iter().collect();
            let mut rev = refs.clone();
            rev.reverse();
            let mut w = vec![];
            for (avg, max) in [(BaselineMetric::AvgNegLogprob, BaselineMetric::MaxNegLogprob), (BaselineMetric::AvgEntropy, BaselineMetric::MaxEntropy)] {
                let a = sentence_baseline(avg, &refs, &mut w).unwrap();
                let m = sentence_baseline(max, &refs, &mut w).unwrap();
                prop_assert!(a >= 0.0 && m >= a - 1e-12);
                let a2 = sentence_baseline(avg, &rev, &mut w).unwrap();
                let m2 = sentence_baseline(max, &rev, &mut w).unwrap();
                prop_assert!((a - a2).abs() < 1e-12 && m == m2);
            }
        }
    }
}
