//! Python bindings: spectrum, universal-cover Green function and the verifier.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qgraph::config::load_graph;
use qgraph::cover::{solve_cover, CoverOptions};
use qgraph::lab::builtin::verify_trio;
use qgraph::lab::verify::{verify as run_verify, VerifyConfig};
use qgraph::spectrum::{eigenvalues_in, SpectrumOptions};

fn py_err(e: qgraph::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Eigenvalues in (a, b] and the number of excluded vertex-vanishing modes.
#[pyfunction]
#[pyo3(signature = (graph, a, b, mesh = 512))]
fn spectrum(graph: &str, a: f64, b: f64, mesh: usize) -> PyResult<(Vec<f64>, usize)> {
    let q = load_graph(graph, None, None).map_err(py_err)?;
    let opts = SpectrumOptions { mesh, ..Default::default() };
    let set = eigenvalues_in(&q, a, b, &opts).map_err(py_err)?;
    Ok((set.eigenvalues(), set.excluded_dirichlet))
}

/// Cover Green data at γ = energy + i·eta, as a dict of complex lists.
#[pyfunction]
#[pyo3(signature = (graph, energy, eta, mesh = 512))]
fn cover<'py>(py: Python<'py>, graph: &str, energy: f64, eta: f64, mesh: usize) -> PyResult<Bound<'py, PyDict>> {
    let q = load_graph(graph, None, None).map_err(py_err)?;
    let opts = CoverOptions { mesh, ..Default::default() };
    let cg = solve_cover(&q, Complex64::new(energy, eta), &opts).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("zeta", cg.zeta)?;
    d.set_item("r_plus", cg.r_plus)?;
    d.set_item("r_minus", cg.r_minus)?;
    d.set_item("g_diag", cg.g_diag)?;
    d.set_item("residual", cg.residual)?;
    d.set_item("iterations", cg.iterations)?;
    Ok(d)
}

/// Runs the identity checks; returns (all_passed, n_checks, failing names).
#[pyfunction]
#[pyo3(signature = (graph = None, eta0 = 0.05, seed = 0))]
fn verify(graph: Option<&str>, eta0: f64, seed: u64) -> PyResult<(bool, usize, Vec<String>)> {
    let graphs = match graph {
        Some(g) => vec![(g.to_string(), load_graph(g, None, None).map_err(py_err)?)],
        None => verify_trio(),
    };
    let cfg = VerifyConfig { eta0, seed, ..Default::default() };
    let out = run_verify(&graphs, &cfg);
    let failing = out.failures().iter().map(|c| format!("{}/{}/{}", c.graph, c.group, c.name)).collect();
    Ok((out.all_passed(), out.checks.len(), failing))
}

#[pymodule]
fn qgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cover, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
