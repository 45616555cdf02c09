//! Run manifests: everything needed to repeat a run, plus timing and warnings.

use halograph::baselines::BaselineMetric;
use halograph::config::Config;
use halograph::harness::SweepParam;
use halograph::synth::SynthShape;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Score {
        input: PathBuf,
    },
    Eval {
        report: PathBuf,
        bundles: PathBuf,
        baselines: Vec<BaselineMetric>,
    },
    Synth {
        seed: u64,
        n_passages: usize,
        shape: SynthShape,
        oracle: PathBuf,
    },
    Sweep {
        input: PathBuf,
        grid: Vec<(SweepParam, Vec<f64>)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageTiming {
    pub passage_id: String,
    pub micros: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    #[serde(flatten)]
    pub invocation: Invocation,
    pub config: Config,
    pub output: PathBuf,
    pub timings: Vec<PassageTiming>,
    pub warnings: Vec<String>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn write(&self) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(manifest_path(&self.output), text + "\n")
    }

    pub fn read(path: &Path) -> anyhow::Result<RunManifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::exit(crate::EXIT_FAILURE, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            crate::exit(
                crate::EXIT_VALIDATION,
                format!("{}: malformed manifest: {e}", path.display()),
            )
        })
    }
}
