//! Uncertainty scoring for hallucination detection over precomputed model
//! outputs: token statistics, entity propagation along semantic triples,
//! sentence interpolation and contradiction-calibrated passage scores, plus
//! probability baselines and the evaluation harness.

pub mod baselines;
pub mod bundle;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod harness;
pub mod passage;
pub mod report;
pub mod sentence;
pub mod synth;
pub mod token;

pub use bundle::{
    load_bundles, load_bundles_from_path, parse_bundle_line, validate_bundle, write_bundles,
    PassageBundle, Violation,
};
pub use config::Config;
pub use error::{BundleError, EvalError, ScoreError};
pub use eval::{pearson, project, roc_auc, spearman, ProjectionSpec, Setup};
pub use graph::{build_graph, SemanticGraph};
pub use harness::{evaluate, EvalResult};
pub use report::{score_corpus, score_passage, UncertaintyReport};
pub use sentence::quantile;
pub use token::token_uncertainty;
