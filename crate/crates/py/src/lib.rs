//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use condwalk::asymptotics::{predict as predict_core, Ingredients, TheoremId};
use condwalk::harmonic;
use condwalk::harness::{self, Cache, ExperimentConfig, HarmonicBudget};
use condwalk::oracle;
use condwalk::special_fns;
use condwalk::walk_sim::{mc_estimate, mc_tilted_survival, Statistic};
use condwalk::{cramer_tilt, IncrementLaw};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => py.import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&s).map_err(err)
}

fn parse_law(law: &str) -> PyResult<IncrementLaw> {
    law.parse().map_err(err)
}

/// Monte Carlo estimate of a path statistic; returns {mean, stderr, count, seed}.
#[pyfunction]
#[pyo3(signature = (law, x, n, stat, samples, seed, tilted=false))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(py: Python<'py>, law: &str, x: f64, n: u64, stat: &str, samples: u64, seed: u64, tilted: bool) -> PyResult<Bound<'py, PyAny>> {
    let law = parse_law(law)?;
    let stat: Statistic = stat.parse().map_err(err)?;
    let est = py.detach(|| {
        if tilted {
            let tilt = cramer_tilt(&law).map_err(err)?;
            mc_tilted_survival(&law, &tilt, x, n, &stat, samples, seed).map_err(err)
        } else {
            mc_estimate(&law, x, n, &stat, samples, seed).map_err(err)
        }
    })?;
    to_py(py, &est)
}

/// Evaluate a predictor; `ingredients` is a dict or a JSON string.
#[pyfunction]
fn predict<'py>(py: Python<'py>, theorem: &str, ingredients: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let id: TheoremId = theorem.parse().map_err(err)?;
    let ing: Ingredients = from_py(py, ingredients)?;
    to_py(py, &predict_core(id, &ing).map_err(err)?)
}

/// Run an experiment config (dict or JSON string) without the on-disk cache.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ExperimentConfig = from_py(py, config)?;
    cfg.validate().map_err(err)?;
    let rows = py.detach(|| harness::run_experiment_with(&cfg, &Cache::disabled())).map_err(err)?;
    to_py(py, &rows)
}

/// Exact law of the killed walk for a finite-support step law.
#[pyfunction]
fn exact_joint_law<'py>(py: Python<'py>, law: &str, x: f64, n: u32) -> PyResult<Bound<'py, PyAny>> {
    let law = parse_law(law)?;
    to_py(py, &oracle::exact_joint_law(&law, x, n).map_err(err)?)
}

#[pyfunction]
fn sparre_andersen_survival(n: u64) -> f64 {
    oracle::sparre_andersen_survival(n)
}

/// `P(tau_0 > k)` for k = 0..=n_max under gaussian(mu, sigma) steps.
#[pyfunction]
fn gaussian_survival(mu: f64, sigma: f64, n_max: usize) -> Vec<f64> {
    oracle::gaussian_survival(mu, sigma, n_max)
}

/// Ladder estimate of V(x); returns {estimate, censoring_rate, bias_bound, warning}.
#[pyfunction]
#[pyo3(signature = (law, x, samples=100_000, seed=0, cap=1_000_000, dual=false))]
fn harmonic_value<'py>(py: Python<'py>, law: &str, x: f64, samples: u64, seed: u64, cap: u64, dual: bool) -> PyResult<Bound<'py, PyAny>> {
    let law = parse_law(law)?;
    let est = py.detach(|| harmonic::estimate_v_ladder(&law, x, cap, samples, seed, dual)).map_err(err)?;
    to_py(py, &est)
}

/// kappa (kappa_lambda with `tilted`) from a dual harmonic table.
#[pyfunction]
#[pyo3(signature = (law, samples=20_000, seed=0x5eed, tilted=false))]
fn kappa<'py>(py: Python<'py>, law: &str, samples: u64, seed: u64, tilted: bool) -> PyResult<Bound<'py, PyAny>> {
    let law = parse_law(law)?;
    let budget = HarmonicBudget { samples, seed, ..Default::default() };
    let res = py.detach(|| -> PyResult<_> {
        let tilt = if tilted { Some(cramer_tilt(&law).map_err(err)?) } else { None };
        let table = harness::dual_table(&law, tilt.as_ref(), &budget, &Cache::disabled()).map_err(err)?;
        harmonic::kappa_constant(&law, &table, tilt.as_ref(), 1e-9).map_err(err)
    })?;
    to_py(py, &res)
}

#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    special_fns::normal_cdf(x)
}

#[pyfunction]
fn rayleigh_cdf(t: f64) -> f64 {
    special_fns::rayleigh_cdf(t)
}

#[pyfunction]
#[pyo3(signature = (s, x, v=1.0))]
fn levy_psi(s: f64, x: f64, v: f64) -> f64 {
    special_fns::levy_psi(s, x, v)
}

#[pyfunction]
fn brownian_exit(x: f64, sigma: f64, n: f64, a: f64, b: f64) -> PyResult<f64> {
    special_fns::brownian_exit(x, sigma, n, a, b).map_err(err)
}

#[pymodule]
fn pycondwalk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(exact_joint_law, m)?)?;
    m.add_function(wrap_pyfunction!(sparre_andersen_survival, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_survival, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_value, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(levy_psi, m)?)?;
    m.add_function(wrap_pyfunction!(brownian_exit, m)?)?;
    Ok(())
}
