//! Projection to `[0, 1]`, label setups, ROC/PR AUC and rank correlations.

use crate::config::{AucKind, ProjectionKind};
use crate::error::EvalError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    /// Logistic location.
    pub mu: f64,
    /// Logistic scale, > 0.
    pub tau: f64,
}

impl ProjectionSpec {
    pub fn new(kind: ProjectionKind) -> Self {
        ProjectionSpec {
            kind,
            mu: 0.0,
            tau: 1.0,
        }
    }

    pub fn logistic(mu: f64, tau: f64) -> Self {
        ProjectionSpec {
            kind: ProjectionKind::Logistic,
            mu,
            tau,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps a non-negative uncertainty into `[0, 1]`, monotone non-decreasing.
pub fn project(score: f64, spec: &ProjectionSpec) -> f64 {
    match spec.kind {
        ProjectionKind::Inverse => {
            if score.is_infinite() {
                1.0
            } else {
                score / (1.0 + score)
            }
        }
        ProjectionKind::Sigmoid => 2.0 * (sigmoid(score) - 0.5),
        ProjectionKind::Logistic => sigmoid((score - spec.mu) / spec.tau),
    }
}

/// Median with the two middle values averaged; `None` for an empty list.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// How sentence labels in `{0, 0.5, 1}` turn into a binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Positives: 1 and 0.5.
    NonFact,
    /// Positives: 1 only.
    NonFactStar,
    /// Positives: 0, scored by `1 - projected uncertainty`.
    Factual,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::NonFact, Setup::NonFactStar, Setup::Factual];
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setup::NonFact => "NonFact",
            Setup::NonFactStar => "NonFact*",
            Setup::Factual => "Factual",
        })
    }
}

/// Whether the detector score is the projected uncertainty or its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Uncertainty,
    Inverted,
}

impl Orientation {
    pub fn apply(self, projected: f64) -> f64 {
        match self {
            Orientation::Uncertainty => projected,
            Orientation::Inverted => 1.0 - projected,
        }
    }
}

pub fn map_labels(setup: Setup, labels: &[f64]) -> Result<(Vec<bool>, Orientation), EvalError> {
    let binary = labels
        .iter()
        .map(|&l| {
            let class = if l == 0.0 {
                0
            } else if l == 0.5 {
                1
            } else if l == 1.0 {
                2
            } else {
                return Err(EvalError::InvalidLabel(l));
            };
            Ok(match setup {
                Setup::NonFact => class >= 1,
                Setup::NonFactStar => class == 2,
                Setup::Factual => class == 0,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let orientation = match setup {
        Setup::Factual => Orientation::Inverted,
        _ => Orientation::Uncertainty,
    };
    Ok((binary, orientation))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn check_pair(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::Undefined(
            "AUC needs both positive and negative examples".into(),
        ));
    }
    Ok((positives, negatives))
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half (Mann-Whitney U over average ranks).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (positives, negatives) = check_pair(scores, labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l)
        .map(|(r, _)| r)
        .sum();
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Average precision: sum over distinct thresholds of recall gain times
/// precision at that threshold. Tied scores enter together.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (positives, _) = check_pair(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            }
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

pub fn auc(kind: AucKind, scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    match kind {
        AucKind::Roc => roc_auc(scores, labels),
        AucKind::Pr => pr_auc(scores, labels),
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::Undefined(
            "correlation needs at least two points".into(),
        ));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(EvalError::Undefined(
            "correlation of a constant series".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Undefined(
            "correlation of a constant series".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_boundaries() {
        let inv = ProjectionSpec::new(ProjectionKind::Inverse);
        assert_eq!(project(0.0, &inv), 0.0);
        assert_eq!(project(1.0, &inv), 0.5);
        assert!(project(1e12, &inv) > 0.999_999);
        assert_eq!(project(f64::INFINITY, &inv), 1.0);
        let sig = ProjectionSpec::new(ProjectionKind::Sigmoid);
        assert_eq!(project(0.0, &sig), 0.0);
        assert!((project(50.0, &sig) - 1.0).abs() < 1e-12);
        let log = ProjectionSpec::logistic(2.0, 1.0);
        assert_eq!(project(2.0, &log), 0.5);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn label_setups() {
        let labels = [1.0, 0.5, 0.0];
        let (nf, o) = map_labels(Setup::NonFact, &labels).unwrap();
        assert_eq!(nf, vec![true, true, false]);
        assert_eq!(o, Orientation::Uncertainty);
        let (nfs, o) = map_labels(Setup::NonFactStar, &labels).unwrap();
        assert_eq!(nfs, vec![true, false, false]);
        assert_eq!(o, Orientation::Uncertainty);
        let (f, o) = map_labels(Setup::Factual, &labels).unwrap();
        assert_eq!(f, vec![false, false, true]);
        assert_eq!(o, Orientation::Inverted);
        assert_eq!(o.apply(0.25), 0.75);
        assert_eq!(
            map_labels(Setup::NonFact, &[0.3]),
            Err(EvalError::InvalidLabel(0.3))
        );
    }

    #[test]
    fn auc_basic() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn pr_auc_basic() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        // ranking: neg, pos -> precision at recall 1 is 1/2
        assert_eq!(pr_auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        // all tied: precision = prevalence
        assert_eq!(pr_auc(&[0.3; 4], &[true, false, false, false]).unwrap(), 0.25);
    }

    #[test]
    fn correlations() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 15.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 5.0], &[-1.0, -2.0, -5.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    proptest! {
        #[test]
        fn auc_complement(scores in prop::collection::hash_set(0u32..1_000_000, 2..60), seed in any::<u64>()) {
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64).collect();
            let labels: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&neg, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn spearman_monotone_invariant(x in prop::collection::vec(0.0f64..10.0, 3..30), y_seed in prop::collection::vec(0.0f64..10.0, 30)) {
            let y = &y_seed[..x.len()];
            let r = spearman(&x, y);
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ty: Vec<f64> = y.iter().map(|v| 3.0 * v + 1.0).collect();
            match (r, spearman(&tx, &ty)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn projections_stay_in_unit_interval(x in 0.0f64..1e6, mu in -10.0f64..10.0, tau in 0.01f64..10.0) {
            for spec in [ProjectionSpec::new(ProjectionKind::Inverse), ProjectionSpec::new(ProjectionKind::Sigmoid), ProjectionSpec::logistic(mu, tau)] {
                let p = project(x, &spec);
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(project(x + 1.0, &spec) >= p);
            }
        }
    }
}
