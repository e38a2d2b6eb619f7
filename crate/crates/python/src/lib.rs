//! Python bindings. Structured results are returned as JSON strings in the
//! same formats the command-line tool reads and writes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use resistkit::bits::VertexSet;
use resistkit::dicttest::{parse_function_specs, run_test, Mode};
use resistkit::distribution::CorrelationMatrix;
use resistkit::gaussian;
use resistkit::io;
use resistkit::multigraph::enumerate_odd_multigraphs;
use resistkit::predicate;
use resistkit::scalar::{format_rational, parse_rational};
use resistkit::vanishing::{search_vanishing, validate_vanishing, SearchOptions, SearchOutcome};

fn err(e: resistkit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_json(s: &str) -> PyResult<serde_json::Value> {
    serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("invalid JSON: {e}")))
}

/// A Boolean predicate on `{-1,1}^k`; points are lists of ±1.
#[pyclass(name = "Predicate", module = "resistkit", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPredicate {
    inner: predicate::Predicate,
}

#[pymethods]
impl PyPredicate {
    #[new]
    fn new(k: usize, sat: Vec<Vec<i64>>) -> PyResult<Self> {
        let inner = predicate::Predicate::from_satisfying_set(k, &sat).map_err(err)?;
        Ok(PyPredicate { inner })
    }

    /// One of xor2, lin3, lin4, nae3, sat3, glst, const0:k, const1:k.
    #[staticmethod]
    fn named(name: &str) -> PyResult<Self> {
        predicate::Predicate::named(name)
            .map(|inner| PyPredicate { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown predicate {name:?}")))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = io::predicate_from_json(&parse_json(text)?).map_err(err)?;
        Ok(PyPredicate { inner })
    }

    fn to_json(&self) -> String {
        io::predicate_to_json(&self.inner).to_string()
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn density(&self) -> f64 {
        self.inner.density().to_f64()
    }

    fn is_even(&self) -> bool {
        self.inner.is_even()
    }

    fn satisfying_points(&self) -> Vec<Vec<i8>> {
        let k = self.inner.arity();
        self.inner.satisfying_points().map(|x| resistkit::bits::point_to_signs(x, k)).collect()
    }

    /// Nonzero coefficients as `(set, "p/q")` pairs.
    fn fourier(&self) -> Vec<(Vec<usize>, String)> {
        (0..1u32 << self.inner.arity())
            .map(VertexSet)
            .filter(|s| !self.inner.coefficient(*s).is_zero())
            .map(|s| (s.elements(), format_rational(&self.inner.coefficient(s).to_rational())))
            .collect()
    }

    fn relevant_sets(&self) -> Vec<Vec<usize>> {
        self.inner.relevant_sets().into_iter().map(VertexSet::elements).collect()
    }

    fn __repr__(&self) -> String {
        format!("Predicate(k={}, truth_hex={:?})", self.inner.arity(), self.inner.to_hex())
    }
}

/// Odd-degree multigraphs on `vertices` with at most `m` edges, as JSON.
#[pyfunction]
fn enumerate_graphs(vertices: Vec<usize>, m: usize) -> PyResult<Vec<String>> {
    if vertices.iter().any(|&v| v >= 32) {
        return Err(PyValueError::new_err("vertices must be below 32"));
    }
    let s = VertexSet::from_elements(&vertices);
    Ok(enumerate_odd_multigraphs(s, m).iter().map(|g| g.to_json().to_string()).collect())
}

/// `E[∏ g_i]` for Gaussians with correlation matrix `rows`.
#[pyfunction]
fn isserlis(rows: Vec<Vec<f64>>, indices: Vec<usize>) -> PyResult<f64> {
    let rho = CorrelationMatrix::<f64>::from_rows(&rows, 1e-12).map_err(err)?;
    if indices.iter().any(|&i| i >= rho.dim()) {
        return Err(PyValueError::new_err("index out of range"));
    }
    Ok(gaussian::isserlis(&rho, &indices))
}

/// Runs the vanishing search; returns `(verdict, certificate JSON or None)`.
#[pyfunction]
#[pyo3(signature = (predicate, m, seed=0, restarts=64))]
fn search(predicate: &PyPredicate, m: usize, seed: u64, restarts: usize) -> PyResult<(String, Option<String>)> {
    let p = &predicate.inner;
    let opts = SearchOptions { seed, restarts, ..SearchOptions::default() };
    Ok(match search_vanishing(p, m, &opts).map_err(err)? {
        SearchOutcome::Primal(cert, _) => ("primal".into(), Some(io::vanishing_certificate_to_json(p, &cert).to_string())),
        SearchOutcome::Dual(cert, _) => ("dual".into(), Some(io::separation_certificate_to_json(p, &cert).to_string())),
        SearchOutcome::Inconclusive(_) => ("inconclusive".into(), None),
    })
}

/// Checks a primal certificate; returns the validation report as JSON.
#[pyfunction]
fn validate(predicate: &PyPredicate, certificate: &str) -> PyResult<String> {
    let p = &predicate.inner;
    let cert = io::vanishing_certificate_from_json(p, &parse_json(certificate)?).map_err(err)?;
    let report = validate_vanishing(p, cert.m, &cert, 1e-9).map_err(err)?;
    Ok(serde_json::to_string(&report).expect("serializable"))
}

/// Acceptance probability of the dictatorship test; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (predicate, certificate, epsilon, functions, mode="exact", seed=0, samples=100_000))]
fn dict_test(
    predicate: &PyPredicate,
    certificate: &str,
    epsilon: &str,
    functions: &str,
    mode: &str,
    seed: u64,
    samples: u64,
) -> PyResult<String> {
    let p = &predicate.inner;
    let cert = io::vanishing_certificate_from_json(p, &parse_json(certificate)?).map_err(err)?;
    let eps = parse_rational(epsilon).map_err(err)?;
    let mut fs = parse_function_specs(functions, seed, 1 << 32).map_err(err)?;
    if fs.len() == 1 {
        fs = vec![fs[0].clone(); p.arity()];
    }
    let mode = match mode {
        "exact" => Mode::Exact,
        "mc" => Mode::Mc,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let report = run_test(p, &cert, &eps, &fs, mode, seed, samples).map_err(err)?;
    Ok(serde_json::to_string(&report).expect("serializable"))
}

/// Runs the command-line tool in-process; returns `(exit code, report or diagnostic)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String) {
    let out = resistkit::cli::run(std::iter::once("resistkit".to_string()).chain(args));
    (out.code, out.report.or(out.diagnostic).unwrap_or_default())
}

#[pymodule(name = "resistkit")]
fn resistkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPredicate>()?;
    m.add_function(wrap_pyfunction!(enumerate_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(isserlis, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(dict_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
