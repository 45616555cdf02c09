//! Python bindings.

use halograph::baselines::BaselineMetric;
use halograph::bundle::PassageBundle;
use halograph::config::ProjectionKind;
use halograph::harness::evaluate_reports;
use halograph::synth::SynthShape;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// Scoring configuration. Keyword arguments override the defaults.
#[pyclass(name = "Config", module = "halograph_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: halograph::Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut value = serde_json::to_value(halograph::Config::default()).map_err(value_err)?;
        if let Some(o) = overrides {
            if let serde_json::Value::Object(extra) = from_py(o.as_any())? {
                value.as_object_mut().expect("config is an object").extend(extra);
            }
        }
        let inner: halograph::Config = serde_json::from_value(value).map_err(value_err)?;
        let problems = inner.check();
        if !problems.is_empty() {
            return Err(PyValueError::new_err(problems.join("; ")));
        }
        Ok(PyConfig { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_string(&self.inner).map_err(value_err)?)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(alpha={}, beta={}, lambda={}, k={})",
            self.inner.alpha, self.inner.beta, self.inner.lambda, self.inner.k
        )
    }
}

/// One passage bundle as produced by the extractor.
#[pyclass(name = "Bundle", module = "halograph_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBundle {
    inner: PassageBundle,
}

#[pymethods]
impl PyBundle {
    #[staticmethod]
    fn from_json(line: &str) -> PyResult<Self> {
        halograph::parse_bundle_line(line, 1)
            .map(|inner| PyBundle { inner })
            .map_err(value_err)
    }

    #[getter]
    fn passage_id(&self) -> &str {
        &self.inner.passage_id
    }

    #[getter]
    fn sentence_count(&self) -> usize {
        self.inner.sentence_count()
    }

    #[getter]
    fn token_count(&self) -> usize {
        self.inner.passage_length()
    }

    /// Violations against `config`, as strings. Empty means valid.
    #[pyo3(signature = (config=None))]
    fn validate(&self, config: Option<&PyConfig>) -> Vec<String> {
        let config = config.map(|c| c.inner.clone()).unwrap_or_default();
        halograph::validate_bundle(&self.inner, &config)
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_line()
    }

    fn __repr__(&self) -> String {
        format!(
            "Bundle(passage_id={:?}, sentences={})",
            self.inner.passage_id,
            self.inner.sentence_count()
        )
    }
}

fn unwrap_bundles(bundles: Vec<PyRef<'_, PyBundle>>) -> Vec<PassageBundle> {
    bundles.iter().map(|b| b.inner.clone()).collect()
}

fn config_or_default(config: Option<&PyConfig>) -> halograph::Config {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

#[pyfunction]
fn load_bundles(path: std::path::PathBuf) -> PyResult<Vec<PyBundle>> {
    halograph::load_bundles_from_path(&path)
        .map(|v| v.into_iter().map(|inner| PyBundle { inner }).collect())
        .map_err(value_err)
}

#[pyfunction]
fn write_bundles(path: std::path::PathBuf, bundles: Vec<PyRef<'_, PyBundle>>) -> PyResult<()> {
    let file = std::fs::File::create(&path)?;
    halograph::write_bundles(std::io::BufWriter::new(file), &unwrap_bundles(bundles))?;
    Ok(())
}

/// Deterministic synthetic corpus.
#[pyfunction]
#[pyo3(signature = (seed, n_passages, k=3, labeled=true))]
fn synth(seed: u64, n_passages: usize, k: usize, labeled: bool) -> PyResult<Vec<PyBundle>> {
    let shape = SynthShape {
        k,
        labeled,
        ..SynthShape::default()
    };
    shape.check().map_err(PyValueError::new_err)?;
    Ok(halograph::synth::generate(seed, n_passages, &shape)
        .into_iter()
        .map(|inner| PyBundle { inner })
        .collect())
}

/// Score a corpus. Returns one report dict per bundle.
#[pyfunction]
#[pyo3(signature = (bundles, config=None))]
fn score<'py>(
    py: Python<'py>,
    bundles: Vec<PyRef<'py, PyBundle>>,
    config: Option<&PyConfig>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let bundles = unwrap_bundles(bundles);
    let config = config_or_default(config);
    let reports = halograph::score_corpus(&bundles, &config).map_err(value_err)?;
    reports.iter().map(|r| to_py(py, &r.to_json_line())).collect()
}

/// Score and evaluate against the bundle labels. Returns one dict per method.
#[pyfunction]
#[pyo3(signature = (bundles, config=None, baselines=Vec::new()))]
fn evaluate<'py>(
    py: Python<'py>,
    bundles: Vec<PyRef<'py, PyBundle>>,
    config: Option<&PyConfig>,
    baselines: Vec<String>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let bundles = unwrap_bundles(bundles);
    let config = config_or_default(config);
    let metrics = baselines
        .iter()
        .map(|b| b.parse::<BaselineMetric>().map_err(PyKeyError::new_err))
        .collect::<PyResult<Vec<_>>>()?;
    let reports = halograph::score_corpus(&bundles, &config).map_err(value_err)?;
    let results = evaluate_reports(&reports, &bundles, &config, &metrics).map_err(value_err)?;
    results
        .iter()
        .map(|r| to_py(py, &serde_json::to_string(r).map_err(value_err)?))
        .collect()
}

#[pyfunction]
fn token_uncertainty(topk: Vec<f64>, position: usize, length: usize) -> PyResult<f64> {
    halograph::token_uncertainty(&topk, position, length).map_err(value_err)
}

#[pyfunction]
fn quantile(values: Vec<f64>, alpha: f64) -> PyResult<f64> {
    halograph::quantile(&values, alpha).map_err(value_err)
}

/// Project a raw uncertainty into `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (score, kind="inverse", mu=0.0, tau=1.0))]
fn project(score: f64, kind: &str, mu: f64, tau: f64) -> PyResult<f64> {
    let kind: ProjectionKind = kind.parse().map_err(PyValueError::new_err)?;
    let spec = match kind {
        ProjectionKind::Logistic => halograph::ProjectionSpec::logistic(mu, tau),
        other => halograph::ProjectionSpec::new(other),
    };
    Ok(halograph::project(score, &spec))
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    halograph::roc_auc(&scores, &labels).map_err(value_err)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    halograph::pearson(&x, &y).map_err(value_err)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    halograph::spearman(&x, &y).map_err(value_err)
}

#[pymodule]
fn halograph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyBundle>()?;
    m.add_function(wrap_pyfunction!(load_bundles, m)?)?;
    m.add_function(wrap_pyfunction!(write_bundles, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(token_uncertainty, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
