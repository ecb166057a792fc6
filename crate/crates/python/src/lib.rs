//! Python bindings: random vectors, HDR regions, surrogates, reliability
//! estimators, the problem registry and benchmark campaigns.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hdrsample::bench::{self, CampaignConfig, Metric};
use hdrsample::hdr;
use hdrsample::problems::Registry;
use hdrsample::reliability::{self as rel, LimitState, SimulationOptions};
use hdrsample::surrogate::{ExperimentalDesign, SamplerTag, SurrogateKind};
use hdrsample::PointSet;

fn err(e: hdrsample::Error) -> PyErr {
    match e {
        hdrsample::Error::InvalidArgument(_)
        | hdrsample::Error::Domain(_)
        | hdrsample::Error::DimensionMismatch { .. }
        | hdrsample::Error::UnknownProblem(_)
        | hdrsample::Error::DuplicateProblem(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn points(rows: Vec<Vec<f64>>) -> PyResult<PointSet> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("no points given"));
    }
    PointSet::from_rows(&rows).map_err(err)
}

#[pyclass(name = "ReliabilityEstimate", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    pf: f64,
    beta: f64,
    cov: f64,
    n_evals: u64,
    method: String,
}

impl From<rel::ReliabilityEstimate> for PyEstimate {
    fn from(e: rel::ReliabilityEstimate) -> Self {
        Self {
            pf: e.pf,
            beta: e.beta,
            cov: e.cov,
            n_evals: e.n_evals,
            method: serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!(
            "ReliabilityEstimate(pf={:e}, beta={:.4}, cov={:.3e}, n_evals={}, method='{}')",
            self.pf, self.beta, self.cov, self.n_evals, self.method
        )
    }
}

/// Random vector with independent marginals tied by a Gaussian copula.
#[pyclass(name = "RandomVector", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRandomVector {
    inner: hdrsample::RandomVector,
}

#[pymethods]
impl PyRandomVector {
    /// Parses `{"marginals": [...], "correlation": [[...]]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: hdrsample::RandomVector::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean()
    }

    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let x = py.detach(|| self.inner.sample(n, seed)).map_err(err)?;
        Ok(x.to_rows())
    }

    fn pdf(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.pdf(&x).map_err(err)
    }

    fn to_standard_normal(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.to_standard_normal(&x).map_err(err)
    }

    fn from_standard(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.from_standard(&z).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("RandomVector(dim={})", self.inner.dim())
    }
}

/// Highest density region with its bounding box.
#[pyclass(name = "HdrRegion", frozen)]
struct PyHdrRegion {
    inner: hdr::HdrRegion,
    cov: f64,
    n_used: usize,
}

#[pymethods]
impl PyHdrRegion {
    #[staticmethod]
    #[pyo3(signature = (rv, alpha=0.01, cov=0.01, seed=0))]
    fn estimate(py: Python<'_>, rv: &PyRandomVector, alpha: f64, cov: f64, seed: u64) -> PyResult<Self> {
        let (inner, est) = py.detach(|| hdr::build_region(&rv.inner, alpha, cov, seed)).map_err(err)?;
        Ok(Self { inner, cov: est.cov, n_used: est.n_used })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: hdr::RegionDocument = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: hdr::HdrRegion::from_document(doc).map_err(err)?, cov: f64::NAN, n_used: 0 })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_document()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    /// `None` for inputs of constant density.
    #[getter]
    fn level(&self) -> Option<f64> {
        self.inner.level()
    }

    #[getter]
    fn cov(&self) -> f64 {
        self.cov
    }

    #[getter]
    fn n_used(&self) -> usize {
        self.n_used
    }

    #[getter]
    fn scale(&self) -> Vec<f64> {
        self.inner.scale().to_vec()
    }

    #[getter]
    fn offset(&self) -> Vec<f64> {
        self.inner.offset().to_vec()
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.inner.contains(&x)
    }

    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(py.detach(|| hdr::sample_hdr(&self.inner, n, seed)).map_err(err)?.to_rows())
    }

    /// KS test of the radial coordinates against U(0, 1); returns (statistic, p).
    fn ks_uniformity(&self, samples: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
        let r = hdr::ks_uniformity(&self.inner, &points(samples)?).map_err(err)?;
        Ok((r.statistic, r.p_value))
    }
}

/// Trained PCE, Kriging or PC-Kriging model.
#[pyclass(name = "Surrogate", frozen)]
struct PySurrogate {
    inner: hdrsample::surrogate::Surrogate,
}

#[pymethods]
impl PySurrogate {
    /// Trains a `"pce"` or `"pck"` model on inputs `x` and responses `y`.
    #[staticmethod]
    #[pyo3(signature = (kind, x, y, rv, seed=0))]
    fn train(py: Python<'_>, kind: &str, x: Vec<Vec<f64>>, y: Vec<f64>, rv: &PyRandomVector, seed: u64) -> PyResult<Self> {
        let kind: SurrogateKind = kind.parse().map_err(err)?;
        let ed = ExperimentalDesign::new(points(x)?, y, rv.inner.clone(), SamplerTag::Natural).map_err(err)?;
        let inner = py.detach(|| hdrsample::surrogate::Surrogate::train(kind, &ed, seed)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: hdrsample::surrogate::Surrogate::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn predict(&self, py: Python<'_>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = points(x)?;
        py.detach(|| self.inner.predict(&x)).map_err(err)
    }

    /// Relative leave-one-out error on the given training design.
    fn loo(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
        let ed = ExperimentalDesign::new(points(x)?, y, self.inner.rv().clone(), SamplerTag::Natural).map_err(err)?;
        self.inner.loo(&ed).map_err(err)
    }

    /// Failure probability of `{model(x) <= threshold}`.
    #[pyo3(signature = (threshold=0.0, method="is", cov=0.01, seed=0))]
    fn failure_probability(&self, py: Python<'_>, threshold: f64, method: &str, cov: f64, seed: u64) -> PyResult<PyEstimate> {
        let model = self.inner.clone();
        let ls = LimitState::from_batch(self.inner.rv().clone(), "surrogate", move |x: &PointSet| {
            Ok(model.predict(x)?.into_iter().map(|v| v - threshold).collect())
        });
        estimate(py, &ls, method, cov, seed)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            hdrsample::surrogate::Surrogate::Pce(_) => "pce",
            hdrsample::surrogate::Surrogate::Kriging(_) => "kriging",
            hdrsample::surrogate::Surrogate::Pck(_) => "pck",
        }
    }
}

fn estimate(py: Python<'_>, ls: &LimitState, method: &str, cov: f64, seed: u64) -> PyResult<PyEstimate> {
    let method: rel::Method = method.parse().map_err(err)?;
    let opts = SimulationOptions::new(cov, seed);
    let est = py
        .detach(|| match method {
            rel::Method::Mc => rel::monte_carlo_pf(ls, &opts),
            rel::Method::Is => rel::importance_sampling_auto(ls, &opts),
        })
        .map_err(err)?;
    Ok(est.into())
}

/// Registered benchmark problem.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: hdrsample::problems::Problem,
}

#[pymethods]
impl PyProblem {
    /// Looks up `franke`, `strip_foundation` or `ddim:<d>:<pf>`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Self { inner: Registry::with_builtins().get(name).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    #[getter]
    fn rv(&self) -> PyRandomVector {
        PyRandomVector { inner: self.inner.rv().clone() }
    }

    /// Reference (beta, pf), if known.
    #[getter]
    fn reference(&self) -> Option<(f64, f64)> {
        self.inner.reference().map(|r| (r.beta, r.pf))
    }

    fn evaluate(&self, py: Python<'_>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = points(x)?;
        py.detach(|| self.inner.evaluate(&x)).map_err(err)
    }

    #[pyo3(signature = (method="mc", cov=0.01, seed=0))]
    fn failure_probability(&self, py: Python<'_>, method: &str, cov: f64, seed: u64) -> PyResult<PyEstimate> {
        estimate(py, &self.inner.limit_state(), method, cov, seed)
    }
}

/// Names of the built-in problems.
#[pyfunction]
fn problem_names() -> Vec<String> {
    Registry::with_builtins().names()
}

/// Runs or resumes a campaign described by a JSON config; returns the number
/// of failed records.
#[pyfunction]
fn run_campaign(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<usize> {
    let cfg: CampaignConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py.detach(|| bench::run_campaign(&cfg, std::path::Path::new(out_dir))).map_err(err)?;
    Ok(out.failures())
}

/// Heat ranking of a results directory as a JSON string.
#[pyfunction]
#[pyo3(signature = (results_dir, metric="rmse"))]
fn rank_heats(results_dir: &str, metric: &str) -> PyResult<String> {
    let metric: Metric = metric.parse().map_err(err)?;
    let records = bench::load_results(std::path::Path::new(results_dir)).map_err(err)?;
    let ranking = bench::rank_heats(&records, metric).map_err(err)?;
    serde_json::to_string(&ranking).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
pub fn pyhdrsample(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRandomVector>()?;
    m.add_class::<PyHdrRegion>()?;
    m.add_class::<PySurrogate>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(problem_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(rank_heats, m)?)?;
    Ok(())
}
