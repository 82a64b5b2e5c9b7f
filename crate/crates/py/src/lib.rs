//! Python surface for the toolkit: spectrum-level primitives plus the
//! scenario runner. Matrices stay on the Rust side; Python sees
//! populations, audit values and JSON results.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qpd_core::deformation;
use qpd_core::error::Error;
use qpd_core::harness::{self, RunOptions};
use qpd_core::hierarchy;
use qpd_core::passivity;
use qpd_core::protocols;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Deformation window for audit values `b` against deformer values `a`
/// sharing an eigenbasis, optionally confined to partition blocks.
/// Returns `(xi_minus, xi_plus)`; `None` marks an unbounded side.
#[pyfunction]
#[pyo3(signature = (b, a, partition=None))]
fn xi_thresholds(
    b: Vec<f64>,
    a: Vec<f64>,
    partition: Option<Vec<usize>>,
) -> PyResult<(Option<f64>, Option<f64>)> {
    let scan = deformation::xi_thresholds(&b, &a, partition.as_deref(), 1e-12).map_err(err)?;
    Ok((scan.minus, scan.plus))
}

/// Slack `delta<B> + xi * delta<A>` for diagonal values and populations.
#[pyfunction]
fn deformation_slack(
    b: Vec<f64>,
    a: Vec<f64>,
    p0: Vec<f64>,
    pf: Vec<f64>,
    xi: f64,
) -> PyResult<f64> {
    if b.len() != a.len() || b.len() != p0.len() || b.len() != pf.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(passivity::delta_expectation(&b, &p0, &pf) + xi * passivity::delta_expectation(&a, &p0, &pf))
}

/// True when `values` and `populations` are anti-monotonically aligned.
#[pyfunction]
#[pyo3(signature = (values, populations, tol=1e-9))]
fn values_are_passive(values: Vec<f64>, populations: Vec<f64>, tol: f64) -> bool {
    passivity::values_are_passive(&values, &populations, tol, tol)
}

/// Worst ascending-partial-sum slack of `pf` against `p0`.
#[pyfunction]
fn majorization_worst_slack(p0: Vec<f64>, pf: Vec<f64>) -> f64 {
    hierarchy::majorization_check(&p0, &pf, 0.0).worst_slack
}

/// Cluster-constant audit values; errors if cluster ranges overlap.
/// Returns `(cluster_values, cluster_of_level)`.
#[pyfunction]
fn coarse_grain(b: Vec<f64>, clusters: Vec<Vec<usize>>) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let cg = hierarchy::coarse_grain(&b, &clusters, 1e-9).map_err(err)?;
    Ok((cg.q, cg.cluster_of))
}

/// Full anti-sort of populations against `a`:
/// `(perm, transpositions, delta_a)`.
#[pyfunction]
fn full_sort(p: Vec<f64>, a: Vec<f64>) -> PyResult<(Vec<usize>, usize, f64)> {
    let pr = protocols::full_sort(&p, &a).map_err(err)?;
    Ok((pr.perm, pr.transpositions, pr.delta_a))
}

/// Lazy class-boundary sort reaching the same optimum:
/// `(perm, transpositions, delta_a)`.
#[pyfunction]
fn partial_sort(p: Vec<f64>, a: Vec<f64>) -> PyResult<(Vec<usize>, usize, f64)> {
    let pr = protocols::partial_sort(&p, &a, 1e-12).map_err(err)?;
    Ok((pr.perm, pr.transpositions, pr.delta_a))
}

/// Ultra-cold boundary `beta_h * omega_h_max / omega_c_min`.
#[pyfunction]
fn beta_c_star(beta_h: f64, omega_h_max: f64, omega_c_min: f64) -> f64 {
    deformation::beta_c_star(beta_h, omega_h_max, omega_c_min)
}

/// Bundled scenario names.
#[pyfunction]
fn list_scenarios() -> Vec<String> {
    harness::SCENARIOS.iter().map(|s| s.to_string()).collect()
}

/// Setup text for a bundled scenario.
#[pyfunction]
fn default_setup(name: &str) -> PyResult<String> {
    harness::default_setup_text(name).map(str::to_string).map_err(err)
}

/// Hash a setup file's canonical form (hex digest carried by results).
#[pyfunction]
fn setup_hash(text: &str) -> PyResult<String> {
    let spec = harness::parse_setup_str(text).map_err(err)?;
    harness::setup_hash(&spec).map_err(err)
}

/// Run a bundled scenario (by name) or a setup given as text; returns
/// the full result as a JSON string.
#[pyfunction]
#[pyo3(signature = (target, seed=None, tol=1e-9))]
fn run_scenario(target: &str, seed: Option<u64>, tol: f64) -> PyResult<String> {
    let spec = if harness::SCENARIOS.contains(&target) {
        harness::default_setup(target).map_err(err)?
    } else {
        harness::parse_setup_str(target).map_err(err)?
    };
    let opts = RunOptions { seed: seed.or(spec.seed).unwrap_or(7), tol };
    let res = harness::run(&spec, &opts).map_err(err)?;
    res.to_json_string().map_err(err)
}

#[pymodule]
fn qpd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(xi_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(deformation_slack, m)?)?;
    m.add_function(wrap_pyfunction!(values_are_passive, m)?)?;
    m.add_function(wrap_pyfunction!(majorization_worst_slack, m)?)?;
    m.add_function(wrap_pyfunction!(coarse_grain, m)?)?;
    m.add_function(wrap_pyfunction!(full_sort, m)?)?;
    m.add_function(wrap_pyfunction!(partial_sort, m)?)?;
    m.add_function(wrap_pyfunction!(beta_c_star, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(default_setup, m)?)?;
    m.add_function(wrap_pyfunction!(setup_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
