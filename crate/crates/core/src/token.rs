//! Token-level uncertainty from top-k statistics and position decay.

use crate::bundle::{PassageBundle, TokenRecord};
use crate::config::TokenScorer;
use crate::error::ScoreError;
use serde::{Deserialize, Serialize};

/// Floor applied to a zero realized probability before taking its log.
pub const MIN_REALIZED_PROB: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub sentence_index: usize,
    pub within_sentence_index: usize,
    pub uncertainty: f64,
}

/// `1 + e^(position / length - 1)`: grows from just above `1 + 1/e` to 2 at the
/// last token.
pub fn decay_term(passage_position: usize, passage_length: usize) -> Result<f64, ScoreError> {
    if passage_length == 0 || passage_position == 0 || passage_position > passage_length {
        return Err(ScoreError::Contract(format!(
            "passage position {passage_position} outside 1..={passage_length}"
        )));
    }
    let ratio = passage_position as f64 / passage_length as f64;
    Ok(1.0 + (ratio - 1.0).exp())
}

/// Population variance (divides by the list length).
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Confidence statistic of a top-k list: its maximum plus its population variance.
pub fn topk_confidence(topk: &[f64]) -> f64 {
    let max = topk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + population_variance(topk)
}

/// Decay-weighted inverse confidence of one token.
///
/// Order of `topk` does not matter. An all-zero list is rejected since the
/// result would be infinite.
pub fn token_uncertainty(
    topk: &[f64],
    passage_position: usize,
    passage_length: usize,
) -> Result<f64, ScoreError> {
    if topk.is_empty() {
        return Err(ScoreError::Contract("empty top-k list".into()));
    }
    if let Some(bad) = topk.iter().find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
        return Err(ScoreError::Contract(format!(
            "top-k probability {bad} outside [0, 1]"
        )));
    }
    let decay = decay_term(passage_position, passage_length)?;
    let confidence = topk_confidence(topk);
    if confidence <= 0.0 {
        return Err(ScoreError::Contract("max + variance is zero".into()));
    }
    Ok(decay / confidence)
}

/// `-ln p` of the realized token, with zero probabilities floored.
/// The flag is set when flooring happened.
pub fn neg_log_prob(realized_prob: f64) -> (f64, bool) {
    if realized_prob <= 0.0 {
        (-MIN_REALIZED_PROB.ln(), true)
    } else {
        (-realized_prob.ln(), false)
    }
}

fn score_one(
    token: &TokenRecord,
    passage_length: usize,
    scorer: TokenScorer,
    warnings: &mut Vec<String>,
) -> Result<f64, ScoreError> {
    match scorer {
        TokenScorer::Statistical => {
            if topk_confidence(&token.topk_probs) <= 0.0 {
                return Err(ScoreError::DegenerateTopk {
                    sentence: token.sentence_index,
                    token: token.within_sentence_index,
                });
            }
            token_uncertainty(&token.topk_probs, token.passage_position, passage_length)
        }
        TokenScorer::NegLogprob => {
            let (value, clamped) = neg_log_prob(token.realized_prob);
            if clamped {
                warnings.push(format!(
                    "token ({}, {}): realized_prob 0 clamped to {MIN_REALIZED_PROB:e}",
                    token.sentence_index, token.within_sentence_index
                ));
            }
            Ok(value)
        }
    }
}

/// Scores every token of a bundle, in bundle order.
pub fn score_tokens(
    bundle: &PassageBundle,
    scorer: TokenScorer,
    warnings: &mut Vec<String>,
) -> Result<Vec<TokenScore>, ScoreError> {
    let length = bundle.passage_length();
    bundle
        .tokens
        .iter()
        .map(|t| {
            Ok(TokenScore {
                sentence_index: t.sentence_index,
                within_sentence_index: t.within_sentence_index,
                uncertainty: score_one(t, length, scorer, warnings)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn decay_at_last_token_is_two() {
        assert_eq!(decay_term(10, 10).unwrap(), 2.0);
        assert_eq!(decay_term(1, 1).unwrap(), 2.0);
    }

    #[test]
    fn decay_closed_form_values() {
        // 1 + e^(-0.9) and 1 + e^(-0.5), evaluated independently
        let expected_1 = 1.0 + 1.0 / E.powf(0.9);
        let expected_5 = 1.0 + 1.0 / E.sqrt();
        assert!((decay_term(1, 10).unwrap() - expected_1).abs() < 1e-12);
        assert!((decay_term(5, 10).unwrap() - expected_5).abs() < 1e-12);
        assert!((decay_term(1, 10).unwrap() - 1.40657).abs() < 1e-5);
        assert!((decay_term(5, 10).unwrap() - 1.60653).abs() < 1e-5);
    }

    #[test]
    fn decay_rejects_out_of_range() {
        assert!(decay_term(0, 10).is_err());
        assert!(decay_term(11, 10).is_err());
        assert!(decay_term(1, 0).is_err());
    }

    #[test]
    fn one_hot_topk() {
        // mean 1/3, population variance 2/9
        let u = token_uncertainty(&[1.0, 0.0, 0.0], 4, 4).unwrap();
        assert!((u - 2.0 / (1.0 + 2.0 / 9.0)).abs() < 1e-12);
        assert!((u - 1.636_363_636_363_636).abs() < 1e-12);
    }

    #[test]
    fn uniform_topk() {
        let third = 1.0 / 3.0;
        let u = token_uncertainty(&[third, third, third], 7, 7).unwrap();
        assert!((u - 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_candidate() {
        assert_eq!(token_uncertainty(&[1.0], 3, 3).unwrap(), 2.0);
    }

    #[test]
    fn all_zero_is_error() {
        assert!(token_uncertainty(&[0.0, 0.0, 0.0], 1, 1).is_err());
        assert!(token_uncertainty(&[], 1, 1).is_err());
    }

    #[test]
    fn neg_log_prob_clamps_zero() {
        assert_eq!(neg_log_prob(1.0), (0.0, false));
        let (v, clamped) = neg_log_prob(0.0);
        assert!(clamped);
        assert!((v - 12.0 * std::f64::consts::LN_10).abs() < 1e-9);
        assert!((neg_log_prob((-2.0f64).exp()).0 - 2.0).abs() < 1e-12);
    }

    fn topk_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..6).prop_filter("non-zero", |v| {
            v.iter().any(|p| *p > 1e-6)
        })
    }

    proptest! {
        #[test]
        fn decay_range(len in 1usize..10_000, frac in 0.0f64..1.0) {
            let pos = 1 + ((len - 1) as f64 * frac) as usize;
            let d = decay_term(pos, len).unwrap();
            prop_assert!(d > 1.0 + (-1.0f64).exp() && d <= 2.0);
        }

        #[test]
        fn increasing_in_position(topk in topk_strategy(), len in 2usize..500, frac in 0.0f64..1.0) {
            let pos = 1 + ((len - 2) as f64 * frac) as usize;
            let a = token_uncertainty(&topk, pos, len).unwrap();
            let b = token_uncertainty(&topk, pos + 1, len).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn permutation_invariant(mut topk in topk_strategy(), len in 1usize..100) {
            let a = token_uncertainty(&topk, len, len).unwrap();
            topk.reverse();
            let b = token_uncertainty(&topk, len, len).unwrap();
            topk.rotate_left(1);
            let c = token_uncertainty(&topk, len, len).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a && (a - c).abs() <= 1e-12 * a);
        }

        #[test]
        fn bounded_by_inverse_max(topk in topk_strategy(), len in 1usize..100, frac in 0.0f64..1.0) {
            let pos = 1 + ((len - 1) as f64 * frac) as usize;
            let max = topk.iter().copied().fold(0.0, f64::max);
            let u = token_uncertainty(&topk, pos, len).unwrap();
            prop_assert!(u > 0.0 && u <= 2.0 / max + 1e-9);
        }

        #[test]
        fn higher_max_same_variance_lowers_uncertainty(shift in 0.001f64..0.3, base in prop::collection::vec(0.0f64..0.5, 3)) {
            // Shifting every entry preserves variance and raises the max.
            let shifted: Vec<f64> = base.iter().map(|p| p + shift).collect();
            prop_assume!(base.iter().any(|p| *p > 1e-6));
            let a = token_uncertainty(&base, 5, 9).unwrap();
            let b = token_uncertainty(&shifted, 5, 9).unwrap();
            prop_assert!(b < a);
        }
    }
}
