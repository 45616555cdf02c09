//! Command bodies.

use crate::manifest::{Invocation, PassageTiming, RunManifest};
use crate::{exit, EXIT_FAILURE, EXIT_MISSING_NLI, EXIT_UNLABELED, EXIT_VALIDATION};
use anyhow::Context;
use halograph::bundle::{load_bundles_from_path, validate_bundle, PassageBundle};
use halograph::config::{Config, IsolatedPolicy};
use halograph::error::{BundleError, EvalError, ScoreError};
use halograph::graph::build_graph;
use halograph::harness::{
    evaluate_reports, format_sweep_table, format_table, sweep, EvalResult, SweepError,
};
use halograph::report::{project_corpus, score_passage, UncertaintyReport};
use halograph::synth::generate;
use halograph_oracle::Params;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

fn load(path: &Path) -> anyhow::Result<Vec<PassageBundle>> {
    load_bundles_from_path(path).map_err(|e| {
        let code = match e {
            BundleError::Io(_) => EXIT_FAILURE,
            _ => EXIT_VALIDATION,
        };
        exit(code, format!("{}: {e}", path.display()))
    })
}

fn violations(bundles: &[PassageBundle], config: &Config) -> Vec<String> {
    bundles
        .iter()
        .enumerate()
        .flat_map(|(n, b)| {
            validate_bundle(b, config)
                .into_iter()
                .map(move |v| format!("passage {} (`{}`): {v}", n + 1, b.passage_id))
        })
        .collect()
}

fn require_valid(bundles: &[PassageBundle], config: &Config) -> anyhow::Result<()> {
    let problems = violations(bundles, config);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(exit(
            EXIT_VALIDATION,
            format!("{} violation(s):\n{}", problems.len(), problems.join("\n")),
        ))
    }
}

fn score_exit(bundle: &PassageBundle, e: ScoreError) -> anyhow::Error {
    let code = match e {
        ScoreError::MissingNli { .. } => EXIT_MISSING_NLI,
        ScoreError::DegenerateTopk { .. } => EXIT_VALIDATION,
        ScoreError::Contract(_) => EXIT_FAILURE,
    };
    exit(code, format!("passage `{}`: {e}", bundle.passage_id))
}

fn eval_exit(e: EvalError) -> anyhow::Error {
    let code = match e {
        EvalError::Unlabeled => EXIT_UNLABELED,
        EvalError::InvalidLabel(_) | EvalError::Mismatch(_) | EvalError::LengthMismatch(..) => {
            EXIT_VALIDATION
        }
        EvalError::Undefined(_) => EXIT_FAILURE,
    };
    exit(code, e.to_string())
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn validate(
    input: &Path,
    config: &Config,
    json: bool,
    dump_graph: Option<&Path>,
) -> anyhow::Result<()> {
    let bundles = load(input)?;
    let mut report = Vec::new();
    for (n, b) in bundles.iter().enumerate() {
        for v in validate_bundle(b, config) {
            report.push((n + 1, b.passage_id.clone(), v));
        }
        for w in halograph::graph::role_warnings(b) {
            eprintln!("warning: passage `{}`: {w}", b.passage_id);
        }
    }
    if let Some(path) = dump_graph {
        write_lines(
            path,
            bundles.iter().map(|b| {
                serde_json::to_string(&build_graph(b).dump(&b.passage_id)).expect("dump serializes")
            }),
        )?;
    }
    if json {
        let rows: Vec<serde_json::Value> = report
            .iter()
            .map(|(line, id, v)| {
                serde_json::json!({"line": line, "passage_id": id, "field": v.field, "rule": v.rule, "detail": v.detail})
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for (line, id, v) in &report {
            println!("passage {line} (`{id}`): {v}");
        }
        println!("{} bundle(s), {} violation(s)", bundles.len(), report.len());
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(exit(EXIT_VALIDATION, format!("{} violation(s)", report.len())))
    }
}

struct Outcome {
    timings: Vec<PassageTiming>,
    warnings: Vec<String>,
}

pub fn execute(invocation: Invocation, config: Config, output: &Path) -> anyhow::Result<()> {
    let outcome = match &invocation {
        Invocation::Score { input } => score(input, &config, output)?,
        Invocation::Eval {
            report,
            bundles,
            baselines,
        } => eval(report, bundles, baselines, &config, output)?,
        Invocation::Synth {
            seed,
            n_passages,
            shape,
            oracle,
        } => synth(*seed, *n_passages, shape, oracle, &config, output)?,
        Invocation::Sweep { input, grid } => run_sweep(input, grid, &config, output)?,
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        invocation,
        config,
        output: std::path::absolute(output)?,
        timings: outcome.timings,
        warnings: outcome.warnings,
    }
    .write()
    .context("writing manifest")?;
    Ok(())
}

pub fn rerun(manifest: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let m = RunManifest::read(manifest)?;
    let output = output.unwrap_or(&m.output).to_path_buf();
    execute(m.invocation, m.config, &output)
}

fn score(input: &Path, config: &Config, output: &Path) -> anyhow::Result<Outcome> {
    let bundles = load(input)?;
    require_valid(&bundles, config)?;
    let mut raw = Vec::with_capacity(bundles.len());
    let mut timings = Vec::with_capacity(bundles.len());
    for b in &bundles {
        let start = Instant::now();
        raw.push(score_passage(b, config).map_err(|e| score_exit(b, e))?);
        timings.push(PassageTiming {
            passage_id: b.passage_id.clone(),
            micros: start.elapsed().as_micros(),
        });
    }
    let reports = project_corpus(raw, config);
    let warnings = reports
        .iter()
        .flat_map(|r| r.warnings.iter().map(move |w| format!("passage `{}`: {w}", r.passage_id)))
        .collect();
    write_lines(output, reports.iter().map(UncertaintyReport::to_json_line))?;
    Ok(Outcome { timings, warnings })
}

pub fn load_reports(path: &Path) -> anyhow::Result<Vec<UncertaintyReport>> {
    let file = File::open(path).map_err(|e| exit(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            exit(
                EXIT_VALIDATION,
                format!("{} line {}: malformed report: {e}", path.display(), n + 1),
            )
        })?);
    }
    Ok(out)
}

fn eval(
    report: &Path,
    bundles: &Path,
    baselines: &[halograph::baselines::BaselineMetric],
    config: &Config,
    output: &Path,
) -> anyhow::Result<Outcome> {
    let reports = load_reports(report)?;
    let bundles = load(bundles)?;
    let results = evaluate_reports(&reports, &bundles, config, baselines).map_err(eval_exit)?;
    print!("{}", format_table(&results));
    let warnings = results
        .iter()
        .flat_map(|r| r.notes.iter().map(move |n| format!("{}: {n}", r.method)))
        .collect();
    write_eval(output, &results)?;
    Ok(Outcome {
        timings: Vec::new(),
        warnings,
    })
}

fn write_eval(path: &Path, results: &[EvalResult]) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(results)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn oracle_params(config: &Config) -> Params {
    Params {
        alpha: config.alpha,
        beta: config.beta,
        lambda: config.lambda,
        skip_isolated: config.isolated_sentence_policy == IsolatedPolicy::Skip,
        sentence_projection: config.sentence_projection.to_string(),
        passage_projection: config.passage_projection.to_string(),
        logistic_mu: config.logistic_mu,
        logistic_tau: config.logistic_tau,
    }
}

fn synth(
    seed: u64,
    n: usize,
    shape: &halograph::synth::SynthShape,
    oracle: &Path,
    config: &Config,
    output: &Path,
) -> anyhow::Result<Outcome> {
    let bundles = generate(seed, n, shape);
    let lines: Vec<String> = bundles.iter().map(PassageBundle::to_json_line).collect();
    // The oracle reads the serialized text, not the in-memory bundles.
    let values = lines
        .iter()
        .map(|l| serde_json::from_str(l))
        .collect::<Result<Vec<serde_json::Value>, _>>()?;
    let scored = halograph_oracle::score_corpus(&values, &oracle_params(config));
    write_lines(output, lines)?;
    write_lines(oracle, scored.iter().map(|v| v.to_string()))?;
    let mut warnings = Vec::new();
    if config.token_scorer != halograph::config::TokenScorer::Statistical
        || config.sentence_scorer != halograph::config::SentenceScorer::Interpolated
    {
        warnings.push("oracle file always uses the statistical/interpolated scorers".into());
    }
    Ok(Outcome {
        timings: Vec::new(),
        warnings,
    })
}

fn run_sweep(
    input: &Path,
    grid: &[(halograph::harness::SweepParam, Vec<f64>)],
    config: &Config,
    output: &Path,
) -> anyhow::Result<Outcome> {
    let bundles = load(input)?;
    require_valid(&bundles, config)?;
    let mut warnings = Vec::new();
    let rows = sweep(&bundles, config, grid, &mut warnings).map_err(|e| match e {
        SweepError::Score(c) => score_exit(&bundles[c.passage_index], c.error),
        SweepError::Eval(e) => eval_exit(e),
    })?;
    print!("{}", format_sweep_table(&rows));
    write_lines(
        output,
        rows.iter().map(|r| serde_json::to_string(r).expect("row serializes")),
    )?;
    Ok(Outcome {
        timings: Vec::new(),
        warnings,
    })
}
