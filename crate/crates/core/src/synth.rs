//! Seeded synthetic bundles for tests and oracle cross-checks.

use crate::bundle::{
    EntitySpan, LinkKind, NliScore, PassageBundle, SentenceLink, TokenRange, TokenRecord,
    TokenRef, Triple, FORMAT_VERSION,
};
use crate::graph::RELATION_POS_TAG;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthShape {
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub k: usize,
    /// Chance that a given sentence pair is linked.
    pub link_prob: f64,
    /// Chance that a triple has all-zero attention.
    pub zero_attention_prob: f64,
    pub labeled: bool,
}

impl Default for SynthShape {
    fn default() -> Self {
        SynthShape {
            min_sentences: 1,
            max_sentences: 6,
            min_tokens: 3,
            max_tokens: 12,
            k: 3,
            link_prob: 0.35,
            zero_attention_prob: 0.1,
            labeled: true,
        }
    }
}

impl SynthShape {
    pub fn check(&self) -> Result<(), String> {
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err("need 1 <= min_sentences <= max_sentences".into());
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return Err("need 1 <= min_tokens <= max_tokens".into());
        }
        if self.k == 0 {
            return Err("k must be >= 1".into());
        }
        for (name, p) in [
            ("link_prob", self.link_prob),
            ("zero_attention_prob", self.zero_attention_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

const ENTITY_TAGS: [&str; 3] = ["PROPN", "NOUN", "NUM"];
const OTHER_TAGS: [&str; 3] = ["DET", "ADP", "ADJ"];
const NER_TYPES: [&str; 4] = ["PERSON", "ORG", "GPE", "DATE"];
const LABELS: [f64; 3] = [0.0, 0.5, 1.0];

fn topk(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    // k + 1 weights so the stored list carries less than full mass.
    let raw: Vec<f64> = (0..=k).map(|_| rng.random_range(0.02..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw[..k].iter().map(|x| x / total).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    p
}

fn realized(rng: &mut ChaCha8Rng, topk: &[f64]) -> f64 {
    let roll: f64 = rng.random();
    if roll < 0.02 {
        0.0
    } else if roll < 0.85 {
        *topk.choose(rng).expect("non-empty top-k")
    } else {
        rng.random_range(0.0..=topk[topk.len() - 1])
    }
}

fn passage(rng: &mut ChaCha8Rng, id: String, shape: &SynthShape) -> PassageBundle {
    let m = rng.random_range(shape.min_sentences..=shape.max_sentences);
    let counts: Vec<usize> = (0..m)
        .map(|_| rng.random_range(shape.min_tokens..=shape.max_tokens))
        .collect();

    let mut tokens = Vec::new();
    let mut entities = Vec::new();
    let mut triples = Vec::new();
    let mut position = 0;
    for (s0, &n) in counts.iter().enumerate() {
        let s = s0 + 1;
        let first_token = tokens.len();
        for j in 1..=n {
            position += 1;
            let probs = topk(rng, shape.k);
            tokens.push(TokenRecord {
                surface: format!("w{s}_{j}"),
                sentence_index: s,
                within_sentence_index: j,
                passage_position: position,
                realized_prob: realized(rng, &probs),
                topk_probs: probs,
                pos_tag: Some((*OTHER_TAGS.choose(rng).unwrap()).to_string()),
                ner_type: None,
            });
        }

        let mut spans: Vec<TokenRange> = Vec::new();
        let mut j = 1;
        while j <= n {
            if rng.random_bool(0.3) {
                let len = rng.random_range(1..=3).min(n - j + 1);
                spans.push(TokenRange {
                    start: j,
                    end: j + len - 1,
                });
                j += len + 1;
            } else {
                j += 1;
            }
        }
        let mut in_entity = vec![false; n + 1];
        let mut ids = Vec::new();
        for (c, range) in spans.into_iter().enumerate() {
            let tag = *ENTITY_TAGS.choose(rng).unwrap();
            let ner = rng.random_bool(0.5).then(|| *NER_TYPES.choose(rng).unwrap());
            for w in range.start..=range.end {
                in_entity[w] = true;
                let t = &mut tokens[first_token + w - 1];
                t.pos_tag = Some(tag.to_string());
                t.ner_type = ner.map(str::to_string);
            }
            let entity_id = format!("e{s}_{}", c + 1);
            ids.push(entity_id.clone());
            entities.push(EntitySpan {
                entity_id,
                sentence_index: s,
                token_range: range,
            });
        }

        let free: Vec<usize> = (1..=n).filter(|w| !in_entity[*w]).collect();
        if ids.len() >= 2 && !free.is_empty() {
            let count = rng.random_range(1..=3);
            for _ in 0..count {
                let picked: Vec<&String> = ids.choose_multiple(rng, 2).collect();
                let relation = *free.choose(rng).unwrap();
                tokens[first_token + relation - 1].pos_tag = Some(RELATION_POS_TAG.to_string());
                tokens[first_token + relation - 1].ner_type = None;
                let zero = rng.random_bool(shape.zero_attention_prob);
                let mut att = || if zero { 0.0 } else { rng.random_range(0.0..1.0) };
                triples.push(Triple {
                    subject: picked[0].clone(),
                    relation_token: TokenRef {
                        sentence_index: s,
                        within_sentence_index: relation,
                    },
                    object: picked[1].clone(),
                    att_subject_object: att(),
                    att_subject_relation: att(),
                    att_relation_object: att(),
                });
            }
        }
    }

    let mut links: Vec<SentenceLink> = Vec::new();
    for a in 1..=m {
        for b in a + 1..=m {
            if rng.random_bool(shape.link_prob) {
                let kind = if rng.random_bool(0.5) {
                    LinkKind::Coreference
                } else {
                    LinkKind::EntityLink
                };
                links.push(SentenceLink {
                    sentence_a: a,
                    sentence_b: b,
                    kind,
                });
            }
        }
    }
    if !links.is_empty() && rng.random_bool(0.1) {
        let dup = links.choose(rng).unwrap().clone();
        links.push(dup);
    }

    let linked = |p: usize, h: usize| {
        let (a, b) = (p.min(h), p.max(h));
        b == a + 1
            || links
                .iter()
                .any(|l| l.sentence_a == a && l.sentence_b == b)
    };
    let mut nli_scores = Vec::new();
    for p in 1..=m {
        for h in 1..=m {
            if p != h && linked(p, h) {
                nli_scores.push(NliScore {
                    premise_sentence: p,
                    hypothesis_sentence: h,
                    contradiction_prob: rng.random_range(0.0..=1.0),
                });
            }
        }
    }

    let (sentence_labels, passage_human_score) = if shape.labeled {
        let labels: Vec<f64> = (0..m).map(|_| *LABELS.choose(rng).unwrap()).collect();
        let mean = labels.iter().sum::<f64>() / m as f64;
        (Some(labels), Some(mean))
    } else {
        (None, None)
    };

    PassageBundle {
        format_version: FORMAT_VERSION,
        passage_id: id,
        sentence_token_counts: counts,
        tokens,
        entities,
        triples,
        links,
        nli_scores,
        sentence_labels,
        passage_human_score,
    }
}

/// `n` bundles from one seeded stream. The same seed and shape always give the
/// same bundles, and a shorter run is a prefix of a longer one.
pub fn generate(seed: u64, n: usize, shape: &SynthShape) -> Vec<PassageBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|idx| passage(&mut rng, format!("synth-{seed}-{idx:04}"), shape))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::validate_bundle;
    use crate::config::Config;
    use crate::graph::role_warnings;

    #[test]
    fn bundles_validate() {
        let config = Config::default();
        for b in generate(7, 200, &SynthShape::default()) {
            let v = validate_bundle(&b, &config);
            assert!(v.is_empty(), "{}: {v:?}", b.passage_id);
            assert!(role_warnings(&b).is_empty(), "{}", b.passage_id);
        }
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let shape = SynthShape::default();
        let a = generate(42, 10, &shape);
        assert_eq!(a, generate(42, 10, &shape));
        assert_eq!(a[..4], generate(42, 4, &shape)[..]);
        assert_ne!(a, generate(43, 10, &shape));
        assert!(generate(42, 0, &shape).is_empty());
    }

    #[test]
    fn corpus_exercises_edge_cases() {
        let bundles = generate(1, 200, &SynthShape::default());
        assert!(bundles.iter().any(|b| b.sentence_count() == 1));
        assert!(bundles.iter().any(|b| b.links.is_empty() && b.sentence_count() > 2));
        assert!(bundles.iter().any(|b| b.triples.len() > 1));
        assert!(bundles
            .iter()
            .flat_map(|b| &b.triples)
            .any(|t| t.att_subject_relation == 0.0 && t.att_relation_object == 0.0));
        assert!(bundles
            .iter()
            .flat_map(|b| &b.tokens)
            .any(|t| t.realized_prob == 0.0));
    }

    #[test]
    fn custom_k_and_unlabeled() {
        let shape = SynthShape {
            k: 5,
            labeled: false,
            ..SynthShape::default()
        };
        let config = Config {
            k: 5,
            ..Config::default()
        };
        for b in generate(3, 20, &shape) {
            assert!(validate_bundle(&b, &config).is_empty());
            assert!(b.sentence_labels.is_none());
        }
        assert!(SynthShape {
            min_sentences: 0,
            ..SynthShape::default()
        }
        .check()
        .is_err());
    }
}
