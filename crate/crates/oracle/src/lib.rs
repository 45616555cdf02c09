//! Reference scorer written directly from the formulas, over raw JSON.
//!
//! Nothing here is shared with the `halograph` crate: it reads bundle JSON as
//! untyped values, loops in the most literal way available, and writes plain
//! JSON. It exists to cross-check the pipeline, so it favours obviousness over
//! speed and does no validation beyond what it needs to not panic.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Sentences without graph neighbours are dropped instead of using
    /// their positional neighbours.
    pub skip_isolated: bool,
    /// "inverse", "sigmoid" or "logistic".
    pub sentence_projection: String,
    pub passage_projection: String,
    /// Logistic location; the corpus median when absent.
    pub logistic_mu: Option<f64>,
    pub logistic_tau: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 0.8,
            beta: 0.65,
            lambda: 0.7,
            skip_isolated: false,
            sentence_projection: "logistic".into(),
            passage_projection: "inverse".into(),
            logistic_mu: None,
            logistic_tau: 1.0,
        }
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

fn int(v: &Value) -> usize {
    v.as_u64().expect("integer") as usize
}

fn arr(v: &Value) -> &Vec<Value> {
    v.as_array().expect("array")
}

fn opt_arr<'a>(bundle: &'a Value, key: &str) -> Vec<&'a Value> {
    match bundle.get(key) {
        Some(Value::Array(items)) => items.iter().collect(),
        _ => Vec::new(),
    }
}

/// Token uncertainty: (1 + e^(pos/len - 1)) / (max + population variance).
pub fn token_uncertainty(topk: &[f64], pos: usize, len: usize) -> f64 {
    let mut max = topk[0];
    for &p in topk {
        if p > max {
            max = p;
        }
    }
    let mut mean = 0.0;
    for &p in topk {
        mean += p;
    }
    mean /= topk.len() as f64;
    let mut var = 0.0;
    for &p in topk {
        var += (p - mean) * (p - mean);
    }
    var /= topk.len() as f64;
    let decay = 1.0 + (pos as f64 / len as f64 - 1.0).exp();
    decay / (max + var)
}

/// Type-7 quantile: sort, h = (n - 1) alpha, interpolate.
pub fn quantile(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    // insertion sort, to stay independent of library sorting
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let h = (v.len() as f64 - 1.0) * alpha;
    let lo = h.floor() as usize;
    let hi = if lo + 1 < v.len() { lo + 1 } else { lo };
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn contradiction(bundle: &Value, premise: usize, hypothesis: usize) -> Option<f64> {
    for s in opt_arr(bundle, "nli_scores") {
        if int(&s["premise_sentence"]) == premise && int(&s["hypothesis_sentence"]) == hypothesis {
            return Some(num(&s["contradiction_prob"]));
        }
    }
    None
}

/// Raw scores of one passage:
/// `{passage_id, tokens: [u], entities: [{entity_id, self, propagated}],
///   sentences: [{entity, global, sentence}], passage: {graph, adjacent, average}}`.
/// A passage method whose contradiction scores are missing is `null`.
pub fn score_passage(bundle: &Value, params: &Params) -> Value {
    let counts: Vec<usize> = arr(&bundle["sentence_token_counts"]).iter().map(int).collect();
    let m = counts.len();
    let mut len = 0;
    for c in &counts {
        len += c;
    }

    // tokens
    let tokens = arr(&bundle["tokens"]);
    let mut token_u = Vec::new();
    let mut token_key = Vec::new();
    for t in tokens {
        let topk: Vec<f64> = arr(&t["topk_probs"]).iter().map(num).collect();
        token_u.push(token_uncertainty(&topk, int(&t["passage_position"]), len));
        token_key.push((int(&t["sentence_index"]), int(&t["within_sentence_index"])));
    }
    let lookup = |s: usize, j: usize| -> f64 {
        for (n, key) in token_key.iter().enumerate() {
            if *key == (s, j) {
                return token_u[n];
            }
        }
        panic!("token ({s}, {j}) not found");
    };

    // entity self-uncertainty: mean over the span
    let entities = opt_arr(bundle, "entities");
    let mut ids = Vec::new();
    let mut sentence_of = Vec::new();
    let mut self_u = Vec::new();
    for e in &entities {
        let s = int(&e["sentence_index"]);
        let start = int(&e["token_range"]["start"]);
        let end = int(&e["token_range"]["end"]);
        let mut sum = 0.0;
        for j in start..=end {
            sum += lookup(s, j);
        }
        ids.push(e["entity_id"].as_str().unwrap().to_string());
        sentence_of.push(s);
        self_u.push(sum / (end - start + 1) as f64);
    }
    let self_of = |id: &str| -> f64 {
        for (n, x) in ids.iter().enumerate() {
            if x == id {
                return self_u[n];
            }
        }
        panic!("entity {id} not found");
    };

    // propagation: sum over incoming triples of att(s,o) / I_o * U(s)
    let triples = opt_arr(bundle, "triples");
    let mut prop_u = Vec::new();
    for id in &ids {
        let incoming: Vec<&&Value> = triples
            .iter()
            .filter(|t| t["object"].as_str().unwrap() == id)
            .collect();
        if incoming.is_empty() {
            prop_u.push(0.0);
            continue;
        }
        let mut intensity = 0.0;
        for t in &incoming {
            intensity += (num(&t["att_subject_relation"]) + num(&t["att_relation_object"])) / 2.0;
        }
        intensity /= incoming.len() as f64;
        if intensity < 1e-9 {
            intensity = 1e-9;
        }
        let mut total = 0.0;
        for t in &incoming {
            total += num(&t["att_subject_object"]) / intensity
                * self_of(t["subject"].as_str().unwrap());
        }
        prop_u.push(total);
    }

    // sentences
    let mut sentences = Vec::new();
    let mut sentence_u = Vec::new();
    for i in 1..=m {
        let mut values = Vec::new();
        for (n, key) in token_key.iter().enumerate() {
            if key.0 == i {
                values.push(token_u[n]);
            }
        }
        let global = quantile(&values, params.alpha);
        let mut sum = 0.0;
        let mut count = 0;
        for n in 0..ids.len() {
            if sentence_of[n] == i {
                sum += self_u[n] + params.beta * prop_u[n];
                count += 1;
            }
        }
        let entity = if count == 0 { global } else { sum / count as f64 };
        let s = params.lambda * entity + (1.0 - params.lambda) * global;
        sentence_u.push(s);
        sentences.push(json!({"entity": entity, "global": global, "sentence": s}));
    }

    // neighbour sets
    let mut linked = vec![vec![false; m + 1]; m + 1];
    let mut any_link = false;
    for l in opt_arr(bundle, "links") {
        let a = int(&l["sentence_a"]);
        let b = int(&l["sentence_b"]);
        linked[a][b] = true;
        linked[b][a] = true;
        any_link = true;
    }
    let mut average = 0.0;
    for u in &sentence_u {
        average += u;
    }
    average /= m as f64;

    let weighted = |sets: &Vec<Vec<usize>>| -> Option<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for i in 1..=m {
            for &j in &sets[i] {
                total += sentence_u[i - 1] * contradiction(bundle, j, i)?;
                count += 1;
            }
        }
        if count == 0 {
            Some(average)
        } else {
            Some(total / count as f64)
        }
    };
    let adjacent_of = |i: usize| -> Vec<usize> {
        let mut out = Vec::new();
        if i > 1 {
            out.push(i - 1);
        }
        if i < m {
            out.push(i + 1);
        }
        out
    };

    let mut adjacent_sets = vec![Vec::new()];
    for i in 1..=m {
        adjacent_sets.push(adjacent_of(i));
    }
    let adjacent = weighted(&adjacent_sets);

    let graph = if !any_link {
        Some(average)
    } else {
        let mut sets = vec![Vec::new()];
        for i in 1..=m {
            let mut own = Vec::new();
            for j in 1..=m {
                if j != i && linked[i][j] {
                    own.push(j);
                }
            }
            if own.is_empty() && !params.skip_isolated {
                own = adjacent_of(i);
            }
            sets.push(own);
        }
        weighted(&sets)
    };

    let mut entity_rows = Vec::new();
    for n in 0..ids.len() {
        entity_rows.push(json!({"entity_id": ids[n], "self": self_u[n], "propagated": prop_u[n]}));
    }
    json!({
        "passage_id": bundle["passage_id"],
        "tokens": token_u,
        "entities": entity_rows,
        "sentences": sentences,
        "passage": {"graph": graph, "adjacent": adjacent, "average": average},
    })
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The three projection forms into `[0, 1]`.
pub fn project(kind: &str, x: f64, mu: f64, tau: f64) -> f64 {
    match kind {
        "inverse" => x / (1.0 + x),
        "sigmoid" => 2.0 * (1.0 / (1.0 + (-x).exp()) - 0.5),
        "logistic" => 1.0 / (1.0 + (-(x - mu) / tau).exp()),
        other => panic!("unknown projection {other}"),
    }
}

/// Scores a corpus and adds projected values: each sentence gains
/// `projected`, and each passage gains `passage_projected` with one entry per
/// method. Logistic locations default to the corpus median of the values
/// being projected (per passage method for passages).
pub fn score_corpus(bundles: &[Value], params: &Params) -> Vec<Value> {
    let mut out: Vec<Value> = bundles.iter().map(|b| score_passage(b, params)).collect();
    let mut all_sentences = Vec::new();
    for r in &out {
        for s in arr(&r["sentences"]) {
            all_sentences.push(num(&s["sentence"]));
        }
    }
    let s_mu = params.logistic_mu.unwrap_or_else(|| median(&all_sentences));
    let methods = ["graph", "adjacent", "average"];
    let mut p_mu = Vec::new();
    for method in methods {
        let mut values = Vec::new();
        for r in &out {
            if let Some(v) = r["passage"][method].as_f64() {
                values.push(v);
            }
        }
        p_mu.push(params.logistic_mu.unwrap_or_else(|| median(&values)));
    }
    for r in &mut out {
        let obj = r.as_object_mut().unwrap();
        for s in obj.get_mut("sentences").unwrap().as_array_mut().unwrap() {
            let x = num(&s["sentence"]);
            s["projected"] = json!(project(&params.sentence_projection, x, s_mu, params.logistic_tau));
        }
        let mut projected = Map::new();
        for (n, method) in methods.iter().enumerate() {
            let value = obj["passage"][*method].as_f64().map(|x| {
                project(&params.passage_projection, x, p_mu[n], params.logistic_tau)
            });
            projected.insert(method.to_string(), json!(value));
        }
        obj.insert("passage_projected".into(), Value::Object(projected));
    }
    out
}

/// Counts positive/negative pairs directly: wins + ties / 2 over all pairs.
pub fn roc_auc_pairs(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if !positive[i] {
            continue;
        }
        for j in 0..scores.len() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if pairs == 0.0 {
        None
    } else {
        Some(wins / pairs)
    }
}

/// Product-moment correlation; `None` for fewer than two points or a constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return None;
    }
    let mut mx = 0.0;
    let mut my = 0.0;
    for i in 0..n {
        mx += x[i];
        my += y[i];
    }
    mx /= n as f64;
    my /= n as f64;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Ranks by counting: rank = 1 + #smaller + #equal-others / 2.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut ranks = Vec::new();
    for i in 0..x.len() {
        let mut smaller = 0.0;
        let mut equal = 0.0;
        for j in 0..x.len() {
            if x[j] < x[i] {
                smaller += 1.0;
            } else if x[j] == x[i] && j != i {
                equal += 1.0;
            }
        }
        ranks.push(1.0 + smaller + equal / 2.0);
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Evaluation of scored passages against the labels carried by the bundles,
/// using the given passage method. Returns
/// `{auc_nonfact, auc_nonfact_star, auc_factual, pearson, spearman}` with
/// `null` for undefined values.
pub fn evaluate(scored: &[Value], bundles: &[Value], method: &str) -> Value {
    let mut s_scores = Vec::new();
    let mut labels = Vec::new();
    let mut p_scores = Vec::new();
    let mut human = Vec::new();
    for (r, b) in scored.iter().zip(bundles) {
        if let Some(Value::Array(ls)) = b.get("sentence_labels") {
            for (s, l) in arr(&r["sentences"]).iter().zip(ls) {
                s_scores.push(num(&s["projected"]));
                labels.push(num(l));
            }
        }
        if let (Some(h), Some(p)) = (
            b.get("passage_human_score").and_then(Value::as_f64),
            r["passage_projected"][method].as_f64(),
        ) {
            p_scores.push(p);
            human.push(h);
        }
    }
    let nonfact: Vec<bool> = labels.iter().map(|l| *l == 1.0 || *l == 0.5).collect();
    let nonfact_star: Vec<bool> = labels.iter().map(|l| *l == 1.0).collect();
    let factual: Vec<bool> = labels.iter().map(|l| *l == 0.0).collect();
    let inverted: Vec<f64> = s_scores.iter().map(|s| 1.0 - s).collect();
    json!({
        "auc_nonfact": roc_auc_pairs(&s_scores, &nonfact),
        "auc_nonfact_star": roc_auc_pairs(&s_scores, &nonfact_star),
        "auc_factual": roc_auc_pairs(&inverted, &factual),
        "pearson": pearson(&p_scores, &human),
        "spearman": spearman(&p_scores, &human),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert!((token_uncertainty(&[1.0, 0.0, 0.0], 4, 4) - 18.0 / 11.0).abs() < 1e-12);
        assert!((token_uncertainty(&[1.0 / 3.0; 3], 2, 2) - 6.0).abs() < 1e-12);
        assert!((quantile(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.8) - 4.2).abs() < 1e-12);
        assert_eq!(roc_auc_pairs(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(roc_auc_pairs(&[0.3, 0.3], &[true, false]), Some(0.5));
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0]), vec![1.5, 3.0, 1.5]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 15.0]).unwrap() - 0.5).abs() < 1e-12);
    }
}
