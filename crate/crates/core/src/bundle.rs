//! Passage bundles: the scorer's only input.
//!
//! A bundle file is JSON Lines, one passage per line, every line carrying
//! `"format_version": 1`. Sentence and token indices are 1-based throughout.

use crate::config::Config;
use crate::error::BundleError;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

pub const FORMAT_VERSION: u64 = 1;

/// Slack allowed on probability bounds.
const PROB_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub surface: String,
    pub sentence_index: usize,
    pub within_sentence_index: usize,
    pub passage_position: usize,
    /// Top-k next-token probabilities, descending.
    pub topk_probs: Vec<f64>,
    /// Probability of the token that was actually generated.
    pub realized_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ner_type: Option<String>,
}

/// Inclusive, 1-based range of within-sentence token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRange {
    pub start: usize,
    pub end: usize,
}

impl TokenRange {
    pub fn len(&self) -> usize {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub entity_id: String,
    pub sentence_index: usize,
    pub token_range: TokenRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenRef {
    pub sentence_index: usize,
    pub within_sentence_index: usize,
}

/// A (subject, relation, object) edge with entity-level attention scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation_token: TokenRef,
    pub object: String,
    pub att_subject_object: f64,
    pub att_subject_relation: f64,
    pub att_relation_object: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    #[serde(rename = "coreference")]
    Coreference,
    #[serde(rename = "entity-link")]
    EntityLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceLink {
    pub sentence_a: usize,
    pub sentence_b: usize,
    pub kind: LinkKind,
}

/// Contradiction probability with the neighbour sentence as premise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliScore {
    pub premise_sentence: usize,
    pub hypothesis_sentence: usize,
    pub contradiction_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageBundle {
    pub format_version: u64,
    pub passage_id: String,
    pub sentence_token_counts: Vec<usize>,
    pub tokens: Vec<TokenRecord>,
    #[serde(default)]
    pub entities: Vec<EntitySpan>,
    #[serde(default)]
    pub triples: Vec<Triple>,
    #[serde(default)]
    pub links: Vec<SentenceLink>,
    #[serde(default)]
    pub nli_scores: Vec<NliScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_labels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_human_score: Option<f64>,
}

impl PassageBundle {
    /// Number of sentences.
    pub fn sentence_count(&self) -> usize {
        self.sentence_token_counts.len()
    }

    /// Total token count of the passage.
    pub fn passage_length(&self) -> usize {
        self.sentence_token_counts.iter().sum()
    }

    /// Tokens belonging to sentence `i` (1-based), in bundle order.
    pub fn sentence_tokens(&self, sentence: usize) -> impl Iterator<Item = &TokenRecord> {
        self.tokens
            .iter()
            .filter(move |t| t.sentence_index == sentence)
    }

    /// Map from (sentence, within-sentence index) to position in `tokens`.
    pub fn token_index(&self) -> HashMap<TokenRef, usize> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(idx, t)| {
                (
                    TokenRef {
                        sentence_index: t.sentence_index,
                        within_sentence_index: t.within_sentence_index,
                    },
                    idx,
                )
            })
            .collect()
    }

    pub fn entity(&self, id: &str) -> Option<&EntitySpan> {
        self.entities.iter().find(|e| e.entity_id == id)
    }

    /// Expected passage position of token (i, j): tokens before sentence i plus j.
    pub fn expected_position(&self, sentence: usize, within: usize) -> usize {
        self.sentence_token_counts[..sentence - 1].iter().sum::<usize>() + within
    }

    /// Contradiction probability NLI(con | premise, hypothesis), if present.
    pub fn contradiction(&self, premise: usize, hypothesis: usize) -> Option<f64> {
        self.nli_scores
            .iter()
            .find(|s| s.premise_sentence == premise && s.hypothesis_sentence == hypothesis)
            .map(|s| s.contradiction_prob)
    }

    /// Writes this bundle as a single JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bundle serialization is infallible")
    }

    /// Copy of the bundle with every top-k list cut to its first `k` entries.
    pub fn truncated_to_k(&self, k: usize) -> PassageBundle {
        let mut out = self.clone();
        for t in &mut out.tokens {
            t.topk_probs.truncate(k);
        }
        out
    }

    fn dangling_reference(&self) -> Option<String> {
        let ids: HashSet<&str> = self.entities.iter().map(|e| e.entity_id.as_str()).collect();
        let tokens: HashSet<TokenRef> = self.token_index().into_keys().collect();
        for (n, triple) in self.triples.iter().enumerate() {
            if !ids.contains(triple.subject.as_str()) {
                return Some(format!("triples[{n}].subject `{}`", triple.subject));
            }
            if !ids.contains(triple.object.as_str()) {
                return Some(format!("triples[{n}].object `{}`", triple.object));
            }
            if !tokens.contains(&triple.relation_token) {
                return Some(format!(
                    "triples[{n}].relation_token ({}, {})",
                    triple.relation_token.sentence_index, triple.relation_token.within_sentence_index
                ));
            }
        }
        None
    }
}

/// Parses one bundle line. `line` is the 1-based line number used in errors.
pub fn parse_bundle_line(text: &str, line: usize) -> Result<PassageBundle, BundleError> {
    let bundle: PassageBundle =
        serde_json::from_str(text).map_err(|source| BundleError::Parse { line, source })?;
    if bundle.format_version != FORMAT_VERSION {
        return Err(BundleError::Version {
            line,
            found: bundle.format_version,
        });
    }
    if let Some(reference) = bundle.dangling_reference() {
        return Err(BundleError::Integrity { line, reference });
    }
    Ok(bundle)
}

/// Reads every bundle from a JSON Lines stream. Blank lines are skipped.
pub fn load_bundles<R: BufRead>(reader: R) -> Result<Vec<PassageBundle>, BundleError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_bundle_line(&line, n + 1)?);
    }
    Ok(out)
}

pub fn load_bundles_from_path(path: &std::path::Path) -> Result<Vec<PassageBundle>, BundleError> {
    let file = std::fs::File::open(path)?;
    load_bundles(std::io::BufReader::new(file))
}

pub fn write_bundles<W: Write>(mut writer: W, bundles: &[PassageBundle]) -> std::io::Result<()> {
    for b in bundles {
        writeln!(writer, "{}", b.to_json_line())?;
    }
    Ok(())
}

/// A broken invariant, named by field path and rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub detail: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: &str, detail: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} ({})", self.field, self.rule, self.detail)
    }
}

fn is_prob(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

/// Checks every bundle invariant against `config.k`. Never panics.
pub fn validate_bundle(bundle: &PassageBundle, config: &Config) -> Vec<Violation> {
    let mut v = Vec::new();
    let m = bundle.sentence_count();
    let valid_sentence = |i: usize| (1..=m).contains(&i);

    if bundle.format_version != FORMAT_VERSION {
        v.push(Violation::new(
            "format_version",
            "version",
            format!("expected {FORMAT_VERSION}, found {}", bundle.format_version),
        ));
    }
    if m == 0 {
        v.push(Violation::new(
            "sentence_token_counts",
            "non-empty",
            "passage must have at least one sentence",
        ));
    }
    for (i, &n) in bundle.sentence_token_counts.iter().enumerate() {
        if n == 0 {
            v.push(Violation::new(
                format!("sentence_token_counts[{i}]"),
                "positive",
                format!("sentence {} has no tokens", i + 1),
            ));
        }
    }
    let total = bundle.passage_length();
    if bundle.tokens.len() != total {
        v.push(Violation::new(
            "tokens",
            "count",
            format!(
                "{} tokens but sentence_token_counts sum to {total}",
                bundle.tokens.len()
            ),
        ));
    }

    validate_tokens(bundle, config, &mut v);
    validate_entities(bundle, &mut v);
    validate_triples(bundle, &mut v);

    let mut linked = HashSet::new();
    for (n, link) in bundle.links.iter().enumerate() {
        let field = format!("links[{n}]");
        if !valid_sentence(link.sentence_a) || !valid_sentence(link.sentence_b) {
            v.push(Violation::new(
                field,
                "sentence-index",
                format!("({}, {}) outside 1..={m}", link.sentence_a, link.sentence_b),
            ));
            continue;
        }
        if link.sentence_a == link.sentence_b {
            v.push(Violation::new(field, "distinct", "a sentence cannot link to itself"));
            continue;
        }
        if link.sentence_a > link.sentence_b {
            v.push(Violation::new(
                field.clone(),
                "ordered",
                format!(
                    "stored as ({}, {}); expected sentence_a < sentence_b",
                    link.sentence_a, link.sentence_b
                ),
            ));
        }
        let (a, b) = (
            link.sentence_a.min(link.sentence_b),
            link.sentence_a.max(link.sentence_b),
        );
        linked.insert((a, b));
    }

    let mut seen_pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for (n, score) in bundle.nli_scores.iter().enumerate() {
        let field = format!("nli_scores[{n}]");
        let (p, h) = (score.premise_sentence, score.hypothesis_sentence);
        if !valid_sentence(p) || !valid_sentence(h) {
            v.push(Violation::new(
                field,
                "sentence-index",
                format!("({p}, {h}) outside 1..={m}"),
            ));
            continue;
        }
        if p == h {
            v.push(Violation::new(field.clone(), "distinct", "premise equals hypothesis"));
        }
        if !is_prob(score.contradiction_prob) {
            v.push(Violation::new(
                field.clone(),
                "probability",
                format!("contradiction_prob {} not in [0, 1]", score.contradiction_prob),
            ));
        }
        *seen_pairs.entry((p, h)).or_default() += 1;
    }
    for (&(p, h), &count) in &seen_pairs {
        if count > 1 {
            v.push(Violation::new(
                "nli_scores",
                "unique-pair",
                format!("ordered pair (premise {p}, hypothesis {h}) given {count} times"),
            ));
        }
    }
    let mut required: Vec<(usize, usize)> = linked
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .collect();
    required.sort_unstable();
    for (p, h) in required {
        if !seen_pairs.contains_key(&(p, h)) {
            v.push(Violation::new(
                "nli_scores",
                "linked-pair",
                format!("missing ordered pair (premise {p}, hypothesis {h})"),
            ));
        }
    }

    if let Some(labels) = &bundle.sentence_labels {
        if labels.len() != m {
            v.push(Violation::new(
                "sentence_labels",
                "length",
                format!("{} labels for {m} sentences", labels.len()),
            ));
        }
        for (n, &l) in labels.iter().enumerate() {
            if l != 0.0 && l != 0.5 && l != 1.0 {
                v.push(Violation::new(
                    format!("sentence_labels[{n}]"),
                    "label-value",
                    format!("{l} not in {{0, 0.5, 1}}"),
                ));
            }
        }
    }
    if let Some(h) = bundle.passage_human_score {
        if !is_prob(h) {
            v.push(Violation::new(
                "passage_human_score",
                "probability",
                format!("{h} not in [0, 1]"),
            ));
        }
    }
    v
}

fn validate_tokens(bundle: &PassageBundle, config: &Config, v: &mut Vec<Violation>) {
    let m = bundle.sentence_count();
    let mut seen = HashSet::new();
    for (n, t) in bundle.tokens.iter().enumerate() {
        let field = format!("tokens[{n}]");
        if !(1..=m).contains(&t.sentence_index) {
            v.push(Violation::new(
                field,
                "sentence-index",
                format!("sentence_index {} outside 1..={m}", t.sentence_index),
            ));
            continue;
        }
        let n_i = bundle.sentence_token_counts[t.sentence_index - 1];
        if !(1..=n_i).contains(&t.within_sentence_index) {
            v.push(Violation::new(
                field.clone(),
                "within-sentence-index",
                format!(
                    "within_sentence_index {} outside 1..={n_i}",
                    t.within_sentence_index
                ),
            ));
        } else {
            let expected = bundle.expected_position(t.sentence_index, t.within_sentence_index);
            if t.passage_position != expected {
                v.push(Violation::new(
                    field.clone(),
                    "passage-position",
                    format!("passage_position {} but expected {expected}", t.passage_position),
                ));
            }
        }
        if !seen.insert((t.sentence_index, t.within_sentence_index)) {
            v.push(Violation::new(
                field.clone(),
                "unique-token",
                format!(
                    "duplicate token ({}, {})",
                    t.sentence_index, t.within_sentence_index
                ),
            ));
        }
        if t.topk_probs.len() != config.k {
            v.push(Violation::new(
                format!("{field}.topk_probs"),
                "length-k",
                format!("length {} but k = {}", t.topk_probs.len(), config.k),
            ));
        }
        if let Some(bad) = t.topk_probs.iter().find(|p| !is_prob(**p)) {
            v.push(Violation::new(
                format!("{field}.topk_probs"),
                "probability",
                format!("{bad} not in [0, 1]"),
            ));
        }
        if t.topk_probs.windows(2).any(|w| w[0] < w[1]) {
            v.push(Violation::new(
                format!("{field}.topk_probs"),
                "descending",
                format!("{:?} is not sorted descending", t.topk_probs),
            ));
        }
        let sum: f64 = t.topk_probs.iter().sum();
        if sum > 1.0 + PROB_SLACK {
            v.push(Violation::new(
                format!("{field}.topk_probs"),
                "mass",
                format!("sum {sum} exceeds 1"),
            ));
        }
        if !is_prob(t.realized_prob) {
            v.push(Violation::new(
                format!("{field}.realized_prob"),
                "probability",
                format!("{} not in [0, 1]", t.realized_prob),
            ));
        } else if let Some(&top) = t.topk_probs.first() {
            if t.realized_prob > top + PROB_SLACK {
                v.push(Violation::new(
                    format!("{field}.realized_prob"),
                    "below-top",
                    format!("{} exceeds top-1 probability {top}", t.realized_prob),
                ));
            }
        }
    }
}

fn validate_entities(bundle: &PassageBundle, v: &mut Vec<Violation>) {
    let m = bundle.sentence_count();
    let mut ids = HashSet::new();
    let mut by_sentence: HashMap<usize, Vec<(usize, TokenRange)>> = HashMap::new();
    for (n, e) in bundle.entities.iter().enumerate() {
        let field = format!("entities[{n}]");
        if !ids.insert(e.entity_id.as_str()) {
            v.push(Violation::new(
                field.clone(),
                "unique-id",
                format!("duplicate entity_id `{}`", e.entity_id),
            ));
        }
        if !(1..=m).contains(&e.sentence_index) {
            v.push(Violation::new(
                field,
                "sentence-index",
                format!("sentence_index {} outside 1..={m}", e.sentence_index),
            ));
            continue;
        }
        let n_i = bundle.sentence_token_counts[e.sentence_index - 1];
        let r = e.token_range;
        if r.start == 0 || r.start > r.end || r.end > n_i {
            v.push(Violation::new(
                format!("{field}.token_range"),
                "within-sentence",
                format!("[{}, {}] not a non-empty range inside 1..={n_i}", r.start, r.end),
            ));
            continue;
        }
        by_sentence.entry(e.sentence_index).or_default().push((n, r));
    }
    let mut sentences: Vec<_> = by_sentence.into_iter().collect();
    sentences.sort_unstable_by_key(|(s, _)| *s);
    for (sentence, mut spans) in sentences {
        spans.sort_unstable_by_key(|(_, r)| (r.start, r.end));
        for w in spans.windows(2) {
            let ((a, ra), (b, rb)) = (w[0], w[1]);
            if rb.start <= ra.end {
                v.push(Violation::new(
                    format!("entities[{b}]"),
                    "no-overlap",
                    format!("overlaps entities[{a}] in sentence {sentence}"),
                ));
            }
        }
    }
}

fn validate_triples(bundle: &PassageBundle, v: &mut Vec<Violation>) {
    let ids: HashMap<&str, &EntitySpan> = bundle
        .entities
        .iter()
        .map(|e| (e.entity_id.as_str(), e))
        .collect();
    let tokens = bundle.token_index();
    for (n, t) in bundle.triples.iter().enumerate() {
        let field = format!("triples[{n}]");
        let subject = ids.get(t.subject.as_str());
        let object = ids.get(t.object.as_str());
        if subject.is_none() {
            v.push(Violation::new(
                format!("{field}.subject"),
                "reference",
                format!("unknown entity `{}`", t.subject),
            ));
        }
        if object.is_none() {
            v.push(Violation::new(
                format!("{field}.object"),
                "reference",
                format!("unknown entity `{}`", t.object),
            ));
        }
        if !tokens.contains_key(&t.relation_token) {
            v.push(Violation::new(
                format!("{field}.relation_token"),
                "reference",
                format!(
                    "no token ({}, {})",
                    t.relation_token.sentence_index, t.relation_token.within_sentence_index
                ),
            ));
        }
        if let (Some(s), Some(o)) = (subject, object) {
            let r = t.relation_token.sentence_index;
            if s.sentence_index != o.sentence_index || s.sentence_index != r {
                v.push(Violation::new(
                    field.clone(),
                    "same-sentence",
                    format!(
                        "subject in {}, relation in {r}, object in {}",
                        s.sentence_index, o.sentence_index
                    ),
                ));
            }
        }
        for (name, a) in [
            ("att_subject_object", t.att_subject_object),
            ("att_subject_relation", t.att_subject_relation),
            ("att_relation_object", t.att_relation_object),
        ] {
            if !(a.is_finite() && a >= 0.0) {
                v.push(Violation::new(
                    format!("{field}.{name}"),
                    "attention",
                    format!("{a} must be finite and >= 0"),
                ));
            }
        }
    }
}
