//! `halograph` command-line driver.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 validation failure
//! (bundle or configuration), 3 missing NLI pair, 4 unlabeled input.

mod manifest;
mod run;

use clap::{Args, Parser, Subcommand};
use halograph::baselines::BaselineMetric;
use halograph::config::{
    AucKind, Config, IsolatedPolicy, PassageMethod, ProjectionKind, SentenceScorer, TokenScorer,
};
use halograph::harness::SweepParam;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_MISSING_NLI: u8 = 3;
pub const EXIT_UNLABELED: u8 = 4;

/// An error with a specific process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit {
        code,
        message: message.into(),
    }
    .into()
}

#[derive(Parser)]
#[command(name = "halograph", version, about = "Uncertainty scoring for hallucination detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check bundles against every schema invariant.
    Validate {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Print violations as JSON.
        #[arg(long)]
        json: bool,
        /// Write each passage's semantic graph summary as JSON Lines.
        #[arg(long, value_name = "PATH")]
        dump_graph: Option<PathBuf>,
    },
    /// Score bundles into a JSON Lines report.
    Score {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a report against the labels in its bundles.
    Eval {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        bundles: PathBuf,
        /// Baseline to evaluate alongside the report; repeatable, or `all`.
        #[arg(long = "baseline", value_name = "METRIC")]
        baselines: Vec<String>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate seeded synthetic bundles plus an oracle score file.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n_passages: usize,
        #[arg(short, long)]
        output: PathBuf,
        /// Oracle file; defaults to `<output stem>.oracle.jsonl`.
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_sentences: usize,
        #[arg(long, default_value_t = 6)]
        max_sentences: usize,
        #[arg(long, default_value_t = 3)]
        min_tokens: usize,
        #[arg(long, default_value_t = 12)]
        max_tokens: usize,
        #[arg(long, default_value_t = 0.35)]
        link_prob: f64,
        #[arg(long)]
        unlabeled: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate one grid point at a time over alpha, beta, lambda and k.
    Sweep {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Explicit grid such as `alpha=0,0.5,1`; repeatable.
        #[arg(long = "grid", value_name = "PARAM=V1,V2,...")]
        grids: Vec<String>,
        /// Parameters to sweep over their default grids (default: all four).
        #[arg(long = "param", value_name = "PARAM")]
        params: Vec<SweepParam>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Repeat a previous run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Write to this path instead of the recorded output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Scoring options. Precedence: flags, then the config file, then defaults.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON or TOML config file.
    #[arg(long, env = "HALOGRAPH_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of stored top-k probabilities per token.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    #[arg(long)]
    projection_sentence: Option<ProjectionKind>,
    #[arg(long)]
    projection_passage: Option<ProjectionKind>,
    #[arg(long)]
    logistic_mu: Option<f64>,
    #[arg(long)]
    logistic_tau: Option<f64>,
    #[arg(long)]
    passage_method: Option<PassageMethod>,
    #[arg(long)]
    auc: Option<AucKind>,
    #[arg(long)]
    isolated: Option<IsolatedPolicy>,
    #[arg(long)]
    token_scorer: Option<TokenScorer>,
    #[arg(long)]
    sentence_scorer: Option<SentenceScorer>,
}

fn read_config_file(path: &Path) -> anyhow::Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| exit(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| exit(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<Config> {
        let mut c = match &self.config {
            Some(path) => read_config_file(path)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),+ $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$field = v; })+
            };
        }
        set!(
            alpha => alpha,
            beta => beta,
            lambda => lambda,
            top_k => k,
            projection_sentence => sentence_projection,
            projection_passage => passage_projection,
            logistic_tau => logistic_tau,
            passage_method => passage_method,
            auc => auc,
            isolated => isolated_sentence_policy,
            token_scorer => token_scorer,
            sentence_scorer => sentence_scorer,
        );
        if self.logistic_mu.is_some() {
            c.logistic_mu = self.logistic_mu;
        }
        let problems = c.check();
        if !problems.is_empty() {
            return Err(exit(EXIT_VALIDATION, problems.join("; ")));
        }
        Ok(c)
    }
}

fn parse_baselines(names: &[String]) -> anyhow::Result<Vec<BaselineMetric>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(BaselineMetric::SENTENCE);
            continue;
        }
        let metric: BaselineMetric = name.parse().map_err(|e: String| exit(EXIT_VALIDATION, e))?;
        if metric.sentence_scorer().is_none() {
            return Err(exit(
                EXIT_VALIDATION,
                format!("`{name}` is token-level; use --token-scorer instead"),
            ));
        }
        out.push(metric);
    }
    out.dedup();
    Ok(out)
}

fn parse_grids(grids: &[String], params: &[SweepParam]) -> anyhow::Result<Vec<(SweepParam, Vec<f64>)>> {
    let mut out = Vec::new();
    for g in grids {
        let (name, values) = g
            .split_once('=')
            .ok_or_else(|| exit(EXIT_VALIDATION, format!("grid `{g}` is not PARAM=V1,V2,...")))?;
        let param: SweepParam = name.trim().parse().map_err(|e: String| exit(EXIT_VALIDATION, e))?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| exit(EXIT_VALIDATION, format!("grid `{g}`: {e}")))?;
        out.push((param, values));
    }
    for &p in params {
        out.push((p, p.default_grid()));
    }
    if out.is_empty() {
        out = SweepParam::ALL.iter().map(|&p| (p, p.default_grid())).collect();
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    use manifest::Invocation;
    match cli.command {
        Command::Validate {
            input,
            config,
            json,
            dump_graph,
        } => run::validate(&input, &config.resolve()?, json, dump_graph.as_deref()),
        Command::Score {
            input,
            output,
            config,
        } => run::execute(Invocation::Score { input: absolute(&input) }, config.resolve()?, &output),
        Command::Eval {
            report,
            bundles,
            baselines,
            output,
            config,
        } => run::execute(
            Invocation::Eval {
                report: absolute(&report),
                bundles: absolute(&bundles),
                baselines: parse_baselines(&baselines)?,
            },
            config.resolve()?,
            &output,
        ),
        Command::Synth {
            seed,
            n_passages,
            output,
            oracle,
            min_sentences,
            max_sentences,
            min_tokens,
            max_tokens,
            link_prob,
            unlabeled,
            config,
        } => {
            let config = config.resolve()?;
            let shape = halograph::synth::SynthShape {
                min_sentences,
                max_sentences,
                min_tokens,
                max_tokens,
                k: config.k,
                link_prob,
                labeled: !unlabeled,
                ..Default::default()
            };
            shape.check().map_err(|e| exit(EXIT_VALIDATION, e))?;
            let oracle = oracle.unwrap_or_else(|| default_oracle_path(&output));
            run::execute(
                Invocation::Synth {
                    seed,
                    n_passages,
                    shape,
                    oracle: absolute(&oracle),
                },
                config,
                &output,
            )
        }
        Command::Sweep {
            input,
            output,
            grids,
            params,
            config,
        } => run::execute(
            Invocation::Sweep {
                input: absolute(&input),
                grid: parse_grids(&grids, &params)?,
            },
            config.resolve()?,
            &output,
        ),
        Command::Rerun { manifest, output } => run::rerun(&manifest, output.as_deref()),
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn default_oracle_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bundles".into());
    output.with_file_name(format!("{stem}.oracle.jsonl"))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Exit>().map_or(EXIT_FAILURE, |x| x.code);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
