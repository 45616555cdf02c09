//! Scoring configuration.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_BETA: f64 = 0.65;
pub const DEFAULT_LAMBDA: f64 = 0.7;
pub const DEFAULT_K: usize = 3;

macro_rules! cli_enum {
    ($(#[$meta:meta])* $name:ident { $($(#[$vmeta:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $($(#[$vmeta])* #[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

cli_enum! {
    /// Monotone map from `[0, inf)` uncertainties into `[0, 1]`.
    ProjectionKind {
        Inverse => "inverse",
        Sigmoid => "sigmoid",
        Logistic => "logistic",
    }
}

cli_enum! {
    /// What to do with a sentence that has no graph neighbours in a passage
    /// that otherwise has links.
    IsolatedPolicy {
        AdjacentFallback => "adjacent-fallback",
        Skip => "skip",
    }
}

cli_enum! {
    PassageMethod {
        Graph => "graph",
        Adjacent => "adjacent",
        Average => "average",
    }
}

cli_enum! {
    /// Token-level uncertainty used throughout the pipeline.
    TokenScorer {
        /// Max/variance of the top-k distribution with the position decay term.
        Statistical => "statistical",
        /// Negative log probability of the realized token.
        NegLogprob => "vanilla_logprob_token",
    }
}

cli_enum! {
    /// Sentence-level uncertainty fed into passage calibration.
    SentenceScorer {
        /// Entity/global interpolation over the semantic graph.
        Interpolated => "interpolated",
        AvgNegLogprob => "avg_neg_logprob",
        MaxNegLogprob => "max_neg_logprob",
        AvgEntropy => "avg_entropy",
        MaxEntropy => "max_entropy",
    }
}

cli_enum! {
    AucKind {
        Roc => "roc",
        Pr => "pr",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Quantile level for the global sentence uncertainty.
    pub alpha: f64,
    /// Weight of propagated uncertainty in the entity term.
    pub beta: f64,
    /// Interpolation weight between entity and global uncertainty.
    pub lambda: f64,
    /// Number of top probabilities stored per token.
    pub k: usize,
    pub sentence_projection: ProjectionKind,
    pub passage_projection: ProjectionKind,
    /// Logistic location; `None` centres on the corpus median.
    pub logistic_mu: Option<f64>,
    pub logistic_tau: f64,
    pub isolated_sentence_policy: IsolatedPolicy,
    pub passage_method: PassageMethod,
    pub token_scorer: TokenScorer,
    pub sentence_scorer: SentenceScorer,
    pub auc: AucKind,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            sentence_projection: ProjectionKind::Logistic,
            passage_projection: ProjectionKind::Inverse,
            logistic_mu: None,
            logistic_tau: 1.0,
            isolated_sentence_policy: IsolatedPolicy::AdjacentFallback,
            passage_method: PassageMethod::Graph,
            token_scorer: TokenScorer::Statistical,
            sentence_scorer: SentenceScorer::Interpolated,
            auc: AucKind::Roc,
        }
    }
}

impl Config {
    /// Checks parameter ranges. Returns one message per problem.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.alpha) {
            problems.push(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            problems.push(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            problems.push(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.k == 0 {
            problems.push("k must be >= 1".to_string());
        }
        if !(self.logistic_tau > 0.0 && self.logistic_tau.is_finite()) {
            problems.push(format!("logistic_tau must be > 0, got {}", self.logistic_tau));
        }
        if let Some(mu) = self.logistic_mu {
            if !mu.is_finite() {
                problems.push(format!("logistic_mu must be finite, got {mu}"));
            }
        }
        problems
    }

    /// True when the four tuned hyperparameters are at their defaults.
    pub fn is_default_hyperparameters(&self) -> bool {
        self.alpha == DEFAULT_ALPHA
            && self.beta == DEFAULT_BETA
            && self.lambda == DEFAULT_LAMBDA
            && self.k == DEFAULT_K
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_tuned_values() {
        let c = Config::default();
        assert_eq!((c.alpha, c.beta, c.lambda, c.k), (0.8, 0.65, 0.7, 3));
        assert_eq!(c.sentence_projection, ProjectionKind::Logistic);
        assert_eq!(c.passage_projection, ProjectionKind::Inverse);
        assert!(c.check().is_empty());
        assert!(c.is_default_hyperparameters());
    }

    #[test]
    fn enum_names_round_trip() {
        for kind in SentenceScorer::ALL {
            assert_eq!(kind.as_str().parse::<SentenceScorer>().unwrap(), *kind);
        }
        assert!("bogus".parse::<PassageMethod>().is_err());
        let json = serde_json::to_string(&IsolatedPolicy::AdjacentFallback).unwrap();
        assert_eq!(json, "\"adjacent-fallback\"");
    }

    #[test]
    fn out_of_range_parameters_reported() {
        let c = Config {
            alpha: 1.5,
            lambda: -0.1,
            k: 0,
            ..Config::default()
        };
        assert_eq!(c.check().len(), 3);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: Config = serde_json::from_str(r#"{"alpha": 0.5}"#).unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.beta, DEFAULT_BETA);
    }
}
