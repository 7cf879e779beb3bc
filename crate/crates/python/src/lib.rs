//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use tclab::asymptotics::{self, SweepConfig};
use tclab::attractor::{self, DepthPolicy, Grid};
use tclab::critical;
use tclab::dynamics;
use tclab::verify::{self, VerifyConfig};
use tclab::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Config { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let json = PyModule::import_bound(py, "json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "RotationNumber", module = "tclab_py")]
#[derive(Clone)]
struct PyRotationNumber {
    inner: tclab::RotationNumber,
}

#[pymethods]
impl PyRotationNumber {
    #[staticmethod]
    fn golden() -> Self {
        PyRotationNumber { inner: tclab::RotationNumber::golden() }
    }

    #[staticmethod]
    #[pyo3(signature = (text, tau = 1.0))]
    fn from_decimal(text: &str, tau: f64) -> PyResult<Self> {
        tclab::RotationNumber::from_decimal(text, tau).map(|inner| PyRotationNumber { inner }).map_err(to_py_err)
    }

    #[getter]
    fn value(&self) -> f64 {
        self.inner.value()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn partial_quotients(&self) -> Vec<u64> {
        self.inner.partial_quotients.clone()
    }

    /// `θ + nω` reduced to [0, 1), with ω in double-double precision.
    fn advance(&self, theta: f64, n: i64) -> f64 {
        self.inner.advance(theta, n)
    }

    fn __repr__(&self) -> String {
        format!("RotationNumber({:.17})", self.inner.value())
    }
}

#[pyclass(name = "SystemParams", module = "tclab_py")]
#[derive(Clone)]
struct PySystemParams {
    inner: tclab::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (alpha, beta, lam, omega = None))]
    fn new(alpha: f64, beta: f64, lam: f64, omega: Option<PyRotationNumber>) -> PyResult<Self> {
        let omega = omega.map(|o| o.inner).unwrap_or_else(tclab::RotationNumber::golden);
        tclab::SystemParams::new(alpha, beta, lam, omega).map(|inner| PySystemParams { inner }).map_err(to_py_err)
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
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn omega(&self) -> PyRotationNumber {
        PyRotationNumber { inner: self.inner.omega.clone() }
    }

    fn with_beta(&self, beta: f64) -> Self {
        PySystemParams { inner: self.inner.with_beta(beta) }
    }

    fn with_alpha(&self, alpha: f64) -> Self {
        PySystemParams { inner: self.inner.with_alpha(alpha) }
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("SystemParams(alpha={}, beta={}, lam={}, omega={:.17})", p.alpha, p.beta, p.lambda, p.omega())
    }
}

/// `(c, dc/dθ, dc/dβ)` at θ.
#[pyfunction]
fn forcing(theta: f64, params: &PySystemParams) -> (f64, f64, f64) {
    let f = dynamics::forcing(theta, &params.inner);
    (f.c, f.dc_dtheta, f.dc_dbeta)
}

#[pyfunction]
fn fiber_orbit(theta0: f64, x0: f64, n: usize, params: &PySystemParams) -> Vec<f64> {
    dynamics::fiber_orbit(theta0, x0, n, &params.inner)
}

#[pyfunction]
fn lyapunov(py: Python<'_>, theta0: f64, x0: f64, n: u64, params: &PySystemParams) -> PyResult<f64> {
    let p = params.inner.clone();
    py.allow_threads(|| dynamics::lyapunov_estimate(theta0, x0, n, &p)).map_err(to_py_err)
}

#[pyfunction]
fn a0_bounds(lam: f64, omega: f64) -> (f64, f64) {
    dynamics::a0_bounds(lam, omega)
}

#[pyfunction]
fn choose_depth(beta: f64, tol: f64) -> u64 {
    attractor::choose_depth(beta, tol)
}

/// Pullback value `{psi, dpsi_dtheta, dpsi_dbeta, residual}` at θ.
#[pyfunction]
fn pullback(py: Python<'_>, theta: f64, depth: u64, params: &PySystemParams) -> PyResult<PyObject> {
    to_py(py, &attractor::pullback_value(theta, depth, &params.inner))
}

/// Attracting curve on a uniform grid, as a dict of columns.
#[pyfunction]
#[pyo3(signature = (params, grid_n = 4096, tol = 1e-12))]
fn sample_curve(py: Python<'_>, params: &PySystemParams, grid_n: usize, tol: f64) -> PyResult<PyObject> {
    let p = params.inner.clone();
    let curve =
        py.allow_threads(|| attractor::sample_curve(&Grid::Uniform { count: grid_n, offset: 0.0 }, DepthPolicy::Auto { tol }, &p));
    to_py(py, &curve)
}

#[pyfunction]
#[pyo3(signature = (lam, omega = None, tol_alpha = 1e-14, depth = 400))]
fn find_alpha_c(py: Python<'_>, lam: f64, omega: Option<PyRotationNumber>, tol_alpha: f64, depth: u64) -> PyResult<PyObject> {
    let om = omega.map(|o| o.inner).unwrap_or_else(tclab::RotationNumber::golden);
    let r = py.allow_threads(|| critical::find_alpha_c(lam, &om, tol_alpha, depth)).map_err(to_py_err)?;
    to_py(py, &r)
}

/// Sweep over β at α = `alpha_c`; returns `{records, dropped}`.
#[pyfunction]
#[pyo3(signature = (betas, alpha_c, lam, grid_n = 4096, seed = 0, omega = None))]
fn sweep(
    py: Python<'_>,
    betas: Vec<f64>,
    alpha_c: f64,
    lam: f64,
    grid_n: usize,
    seed: u64,
    omega: Option<PyRotationNumber>,
) -> PyResult<PyObject> {
    let om = omega.map(|o| o.inner).unwrap_or_else(tclab::RotationNumber::golden);
    let base = tclab::SystemParams::new(alpha_c, 1.0, lam, om).map_err(to_py_err)?;
    let cfg = SweepConfig { grid_n, seed, ..SweepConfig::default() };
    let out = py.allow_threads(|| asymptotics::sweep(&betas, alpha_c, &base, &cfg));
    to_py(py, &out)
}

/// Both asymptotic fits over records returned by `sweep`.
#[pyfunction]
#[pyo3(signature = (records, predicted, beta_min = asymptotics::FIT_BETA_MIN))]
fn fit_laws(py: Python<'_>, records: PyObject, predicted: f64, beta_min: f64) -> PyResult<PyObject> {
    let json = PyModule::import_bound(py, "json")?;
    let text: String = json.call_method1("dumps", (records,))?.extract()?;
    let recs: Vec<asymptotics::SweepRecord> =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("bad records: {e}")))?;
    let lin = asymptotics::fit_linear_distance(&recs, beta_min, predicted).map_err(to_py_err)?;
    let pow = asymptotics::fit_power_derivative(&recs, beta_min).map_err(to_py_err)?;
    to_py(py, &(lin, pow))
}

#[pyfunction]
fn predicted_distance_coefficient(params: &PySystemParams) -> f64 {
    asymptotics::predicted_distance_coefficient(&params.inner)
}

/// Lemma reports as a list of dicts.
#[pyfunction]
#[pyo3(signature = (params, grid_n = 100_000, seed = 0))]
fn verify_lemmas(py: Python<'_>, params: &PySystemParams, grid_n: usize, seed: u64) -> PyResult<PyObject> {
    let p = params.inner.clone();
    let cfg = VerifyConfig { seed, ..VerifyConfig::with_grid(grid_n) };
    let reports = py.allow_threads(|| verify::verify_all(&p, &cfg));
    to_py(py, &reports)
}

#[pymodule]
fn tclab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRotationNumber>()?;
    m.add_class::<PySystemParams>()?;
    m.add_function(wrap_pyfunction!(forcing, m)?)?;
    m.add_function(wrap_pyfunction!(fiber_orbit, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(a0_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(choose_depth, m)?)?;
    m.add_function(wrap_pyfunction!(pullback, m)?)?;
    m.add_function(wrap_pyfunction!(sample_curve, m)?)?;
    m.add_function(wrap_pyfunction!(find_alpha_c, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_laws, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_distance_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lemmas, m)?)?;
    Ok(())
}
