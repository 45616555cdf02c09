use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halograph"));
    c.env_remove("HALOGRAPH_CONFIG");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn method(report: &Value, name: &str) -> Value {
    report["passage"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == name)
        .unwrap()
        .clone()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn score_two_sentence_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    ok(&["score", p(&fixture("two_sentence.jsonl")), "-o", p(&out)]);
    let r = &lines(&out)[0];
    let graph = method(r, "graph")["raw"].as_f64().unwrap();
    assert!((graph - 1.1).abs() < 1e-9, "{graph}");
    assert_eq!(method(r, "average")["raw"].as_f64().unwrap(), 3.0);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.jsonl.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "score");
    assert_eq!(manifest["timings"].as_array().unwrap().len(), 1);
}

#[test]
fn propagation_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    ok(&["score", p(&fixture("propagation.jsonl")), "-o", p(&out)]);
    let r = &lines(&out)[0];
    let e = r["entities"].as_array().unwrap();
    let self_of = |id: &str| {
        e.iter().find(|x| x["entity_id"] == id).unwrap()["self_uncertainty"]
            .as_f64()
            .unwrap()
    };
    let radium = e.iter().find(|x| x["entity_id"] == "radium").unwrap();
    let expected = 0.4 / 0.4 * self_of("marie") + 0.1 / 0.4 * self_of("pierre");
    assert!(close(radium["propagated_uncertainty"].as_f64().unwrap(), expected, 1e-12));
    assert_eq!(
        e.iter().find(|x| x["entity_id"] == "marie").unwrap()["propagated_uncertainty"],
        0.0
    );
}

#[test]
fn beta_zero_and_lambda_one() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "5", "--n-passages", "20", "-o", p(&bundles)]);
    let out = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&out), "--beta", "0"]);
    for r in lines(&out) {
        for s in r["sentences"].as_array().unwrap() {
            let i = &s["sentence_index"];
            let selfs: Vec<f64> = r["entities"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|e| &e["sentence_index"] == i)
                .map(|e| e["self_uncertainty"].as_f64().unwrap())
                .collect();
            if !selfs.is_empty() {
                let mean = selfs.iter().sum::<f64>() / selfs.len() as f64;
                assert!(close(s["entity_uncertainty"].as_f64().unwrap(), mean, 1e-12));
            }
        }
    }
    ok(&["score", p(&bundles), "-o", p(&out), "--lambda", "1.0"]);
    for r in lines(&out) {
        for s in r["sentences"].as_array().unwrap() {
            assert_eq!(s["raw"], s["entity_uncertainty"]);
        }
    }
}

fn write_labeled(dir: &Path, scores_and_labels: &[(f64, f64)]) -> PathBuf {
    // One single-token sentence per passage; the top probability sets the score.
    let path = dir.join("labeled.jsonl");
    let text: String = scores_and_labels
        .iter()
        .enumerate()
        .map(|(n, (top, label))| {
            serde_json::json!({
                "format_version": 1,
                "passage_id": format!("p{n}"),
                "sentence_token_counts": [1],
                "tokens": [{"surface": "x", "sentence_index": 1, "within_sentence_index": 1,
                            "passage_position": 1, "topk_probs": [top], "realized_prob": top}],
                "sentence_labels": [label],
                "passage_human_score": label,
            })
            .to_string()
                + "\n"
        })
        .collect();
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn eval_perfect_separation() {
    let dir = tempfile::tempdir().unwrap();
    // lower top probability -> higher uncertainty; label tracks it
    let bundles = write_labeled(dir.path(), &[(0.2, 1.0), (0.3, 0.5), (0.9, 0.0), (0.8, 0.0)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&report), "--top-k", "1"]);
    let result = dir.path().join("e.json");
    let out = ok(&[
        "eval", "--report", p(&report), "--bundles", p(&bundles), "-o", p(&result), "--top-k", "1",
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("NonFact*"));
    let r: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    for key in ["auc_nonfact", "auc_nonfact_star", "auc_factual"] {
        assert_eq!(r[0][key], 1.0, "{key}");
    }
}

#[test]
fn eval_constant_scores() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = write_labeled(dir.path(), &[(0.5, 1.0), (0.5, 0.5), (0.5, 0.0)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&report), "--top-k", "1"]);
    let result = dir.path().join("e.json");
    ok(&[
        "eval", "--report", p(&report), "--bundles", p(&bundles), "-o", p(&result), "--top-k", "1",
    ]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(r[0]["auc_nonfact"], 0.5);
    assert_eq!(r[0]["auc_factual"], 0.5);
    assert!(r[0]["pearson"].is_null());
    assert!(r[0]["spearman"].is_null());
}

#[test]
fn eval_matches_oracle_on_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "9", "--n-passages", "50", "-o", p(&bundles)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&report)]);
    let result = dir.path().join("e.json");
    ok(&["eval", "--report", p(&report), "--bundles", p(&bundles), "-o", p(&result)]);
    let ours: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    let oracle = halograph_oracle::evaluate(
        &lines(&dir.path().join("b.oracle.jsonl")),
        &lines(&bundles),
        "graph",
    );
    for key in ["auc_nonfact", "auc_nonfact_star", "auc_factual", "pearson", "spearman"] {
        let (a, b) = (ours[0][key].as_f64().unwrap(), oracle[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-9, "{key}: {a} vs {b}");
    }
}

#[test]
fn eval_with_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "3", "--n-passages", "15", "-o", p(&bundles)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&report)]);
    let result = dir.path().join("e.json");
    ok(&[
        "eval", "--report", p(&report), "--bundles", p(&bundles), "-o", p(&result),
        "--baseline", "all",
    ]);
    let r: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(r.as_array().unwrap().len(), 5);
    assert_eq!(r[1]["method"], "avg_neg_logprob");
    let bad = run(&[
        "eval", "--report", p(&report), "--bundles", p(&bundles), "-o", p(&result),
        "--baseline", "vanilla_logprob_token",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "42", "--n-passages", "10", "-o", p(&a)]);
    ok(&["synth", "--seed", "42", "--n-passages", "10", "-o", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.oracle.jsonl")).unwrap(),
        fs::read(dir.path().join("b.oracle.jsonl")).unwrap()
    );
}

#[test]
fn synth_zero_passages() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    ok(&["synth", "--seed", "1", "--n-passages", "0", "-o", p(&a)]);
    assert_eq!(fs::read(&a).unwrap(), b"");
    assert_eq!(fs::read(dir.path().join("a.oracle.jsonl")).unwrap(), b"");
    ok(&["validate", p(&a)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&a), "-o", p(&report)]);
    assert_eq!(fs::read(&report).unwrap(), b"");
}

#[test]
fn seed_42_matches_oracle_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "42", "--n-passages", "10", "-o", p(&bundles)]);
    let report = dir.path().join("r.jsonl");
    ok(&["score", p(&bundles), "-o", p(&report)]);
    let ours = lines(&report);
    let oracle = lines(&dir.path().join("b.oracle.jsonl"));
    assert_eq!(ours.len(), 10);
    for (r, o) in ours.iter().zip(&oracle) {
        let tokens: Vec<f64> = r["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["uncertainty"].as_f64().unwrap())
            .collect();
        for (a, b) in tokens.iter().zip(o["tokens"].as_array().unwrap()) {
            assert!(close(*a, b.as_f64().unwrap(), 1e-9));
        }
        for (s, os) in r["sentences"].as_array().unwrap().iter().zip(o["sentences"].as_array().unwrap()) {
            assert!(close(s["raw"].as_f64().unwrap(), os["sentence"].as_f64().unwrap(), 1e-9));
            assert!(close(s["projected"].as_f64().unwrap(), os["projected"].as_f64().unwrap(), 1e-9));
        }
        for m in ["graph", "adjacent", "average"] {
            let a = method(r, m)["raw"].as_f64().unwrap();
            let b = o["passage"][m].as_f64().unwrap();
            assert!(close(a, b, 1e-9), "{m}: {a} vs {b}");
        }
    }
}

#[test]
fn sweep_cells_equal_single_eval_runs() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "11", "--n-passages", "12", "-o", p(&bundles)]);
    let table = dir.path().join("sweep.jsonl");
    let out = ok(&[
        "sweep", p(&bundles), "-o", p(&table), "--grid", "alpha=0,0.5,1", "--grid", "k=1,3,5",
        "--param", "lambda",
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("U_G"));
    let rows = lines(&table);
    // k=5 exceeds the stored top-k and is skipped
    assert_eq!(rows.len(), 3 + 2 + 9);
    let alpha: Vec<f64> = rows[..3]
        .iter()
        .map(|r| r["mean_global_uncertainty"].as_f64().unwrap())
        .collect();
    assert!(alpha[0] <= alpha[1] && alpha[1] <= alpha[2]);
    assert_eq!(rows.iter().filter(|r| r["is_default"] == true).count(), 2);

    for row in [&rows[1], &rows[4], &rows[9]] {
        let param = row["param"].as_str().unwrap();
        let value = row["value"].as_f64().unwrap().to_string();
        let flag = if param == "k" { "--top-k".to_string() } else { format!("--{param}") };
        let input = if param == "k" {
            let truncated = dir.path().join("trunc.jsonl");
            let text: String = lines(&bundles)
                .into_iter()
                .map(|mut b| {
                    let k: usize = value.parse().unwrap();
                    for t in b["tokens"].as_array_mut().unwrap() {
                        t["topk_probs"].as_array_mut().unwrap().truncate(k);
                    }
                    b.to_string() + "\n"
                })
                .collect();
            fs::write(&truncated, text).unwrap();
            truncated
        } else {
            bundles.clone()
        };
        let report = dir.path().join("r.jsonl");
        ok(&["score", p(&input), "-o", p(&report), &flag, &value]);
        let result = dir.path().join("e.json");
        ok(&["eval", "--report", p(&report), "--bundles", p(&input), "-o", p(&result), &flag, &value]);
        let single: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
        for key in ["auc_nonfact", "auc_nonfact_star", "auc_factual", "pearson", "spearman"] {
            assert_eq!(row["result"][key], single[0][key], "{param}={value} {key}");
        }
    }
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("b.jsonl");
    ok(&["synth", "--seed", "8", "--n-passages", "10", "-o", p(&bundles)]);
    let first = dir.path().join("first.jsonl");
    ok(&["score", p(&bundles), "-o", p(&first), "--alpha", "0.6", "--passage-method", "adjacent"]);
    let again = dir.path().join("again.jsonl");
    ok(&["rerun", "--manifest", p(&dir.path().join("first.jsonl.manifest.json")), "-o", p(&again)]);
    assert_eq!(fs::read(&first).unwrap(), fs::read(&again).unwrap());

    let copy = dir.path().join("copy.jsonl");
    ok(&["rerun", "--manifest", p(&dir.path().join("b.jsonl.manifest.json")), "-o", p(&copy)]);
    assert_eq!(fs::read(&bundles).unwrap(), fs::read(&copy).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "alpha = 0.3\nlambda = 1.0\n").unwrap();
    let out = dir.path().join("r.jsonl");
    let status = bin()
        .env("HALOGRAPH_CONFIG", &cfg)
        .args(["score", p(&fixture("propagation.jsonl")), "-o", p(&out), "--alpha", "0.9"])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.jsonl.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["alpha"], 0.9);
    assert_eq!(manifest["config"]["lambda"], 1.0);

    fs::write(&cfg, "gamma = 1\n").unwrap();
    let out = run(&["score", p(&fixture("propagation.jsonl")), "-o", p(&dir.path().join("x")), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let json_cfg = dir.path().join("c.json");
    fs::write(&json_cfg, r#"{"beta": 0.0}"#).unwrap();
    ok(&["score", p(&fixture("propagation.jsonl")), "-o", p(&dir.path().join("y")), "--config", p(&json_cfg)]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");

    // 1: unreadable input
    let missing = run(&["score", p(&dir.path().join("nope.jsonl")), "-o", p(&out)]);
    assert_eq!(missing.status.code(), Some(1));

    // 2: validation failure, with the violation listed
    let broken = dir.path().join("broken.jsonl");
    let mut b: Value = lines(&fixture("two_sentence.jsonl")).remove(0);
    b["tokens"][0]["topk_probs"] = serde_json::json!([0.1, 0.5, 0.2]);
    fs::write(&broken, b.to_string() + "\n").unwrap();
    let invalid = run(&["score", p(&broken), "-o", p(&out)]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("descending"));
    assert_eq!(run(&["validate", p(&broken)]).status.code(), Some(2));
    let json = run(&["validate", p(&broken), "--json"]);
    let rows: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(rows[0]["rule"], "descending");

    // 2: bad parameter
    let bad = run(&["score", p(&fixture("two_sentence.jsonl")), "-o", p(&out), "--alpha", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));

    // 3: missing NLI pair for the configured method. Without links the
    // bundle validates; the adjacent method still needs (2, 1) and (1, 2).
    let no_nli = dir.path().join("no_nli.jsonl");
    let mut b: Value = lines(&fixture("two_sentence.jsonl")).remove(0);
    b["nli_scores"] = serde_json::json!([]);
    b["links"] = serde_json::json!([]);
    fs::write(&no_nli, b.to_string() + "\n").unwrap();
    let report = dir.path().join("nn.jsonl");
    ok(&["score", p(&no_nli), "-o", p(&report)]);
    let failed = run(&["score", p(&no_nli), "-o", p(&report), "--passage-method", "adjacent"]);
    assert_eq!(failed.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("premise 2, hypothesis 1"));

    // 4: unlabeled input
    let unlabeled = dir.path().join("u.jsonl");
    ok(&["synth", "--seed", "2", "--n-passages", "3", "--unlabeled", "-o", p(&unlabeled)]);
    let report = dir.path().join("ur.jsonl");
    ok(&["score", p(&unlabeled), "-o", p(&report)]);
    let code = run(&["eval", "--report", p(&report), "--bundles", p(&unlabeled), "-o", p(&dir.path().join("e.json"))])
        .status
        .code();
    assert_eq!(code, Some(4));
}

#[test]
fn dump_graph() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("g.jsonl");
    ok(&["validate", p(&fixture("two_sentence.jsonl")), "--dump-graph", p(&dump)]);
    let g = &lines(&dump)[0];
    assert_eq!(g["edge_count"], 1);
    assert_eq!(g["neighbors"]["1"], serde_json::json!([2]));
}
