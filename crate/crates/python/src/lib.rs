//! Python bindings. Reports cross the boundary as JSON or CSV text so the
//! Python side sees exactly what the CLI writes.

use landau_levels::error::Error;
use landau_levels::{perturbation, pinning, sector_solver, splitting};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Radially symmetric step potential: a sum of `height * chi_{r_inner <= rho <= r_outer}`.
#[pyclass(name = "StepPotential", module = "landau_levels_py", from_py_object)]
#[derive(Clone)]
struct PyStepPotential {
    inner: landau_levels::StepPotential,
}

#[pymethods]
impl PyStepPotential {
    #[new]
    fn new(annuli: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let annuli = annuli
            .into_iter()
            .map(|(lo, hi, h)| landau_levels::Annulus::new(lo, hi, h))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let inner = landau_levels::StepPotential::new(annuli).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        landau_levels::StepPotential::from_json(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn annuli(&self) -> Vec<(f64, f64, f64)> {
        self.inner.annuli.iter().map(|a| (a.r_inner, a.r_outer, a.height)).collect()
    }

    fn evaluate(&self, rho: f64) -> f64 {
        self.inner.evaluate(rho)
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn is_sign_indefinite(&self) -> bool {
        self.inner.is_sign_indefinite()
    }

    fn __repr__(&self) -> String {
        format!("StepPotential({:?})", self.annuli())
    }
}

#[pyfunction]
fn landau_level(b: f64, q: u64) -> f64 {
    landau_levels::landau_basis::landau_level(b, q)
}

/// `2 pi int phi_{q,m}^2 rho d rho` over `[r_lo, r_hi]`.
#[pyfunction]
fn overlap(q: u64, m: u64, b: f64, r_lo: f64, r_hi: f64) -> PyResult<f64> {
    landau_levels::landau_basis::overlap(q, m, b, r_lo, r_hi).map_err(to_py)
}

/// Eigenvalue of sector `m` tracking the level `2bq`.
#[pyfunction]
#[pyo3(signature = (b, q, m, potential, tol=None))]
fn eigenvalue_near_level(b: f64, q: u64, m: i64, potential: &PyStepPotential, tol: Option<f64>) -> PyResult<f64> {
    let tol = tol.unwrap_or_else(|| sector_solver::default_tol(b));
    sector_solver::eigenvalue_near_level(b, q, m, &potential.inner, tol).map(|e| e.energy).map_err(to_py)
}

/// Per-sector table `m,E,displacement,Q_used,residual` and the pinned count.
#[pyfunction]
#[pyo3(signature = (b, q, potential, m_lo, m_hi, tol=None))]
fn multiplicity_count(
    b: f64,
    q: u64,
    potential: &PyStepPotential,
    m_lo: i64,
    m_hi: i64,
    tol: Option<f64>,
) -> PyResult<(usize, String)> {
    let tol = tol.unwrap_or_else(|| sector_solver::default_tol(b));
    let report = sector_solver::multiplicity_count(b, q, &potential.inner, m_lo..=m_hi, tol).map_err(to_py)?;
    Ok((report.count, report.to_csv()))
}

#[pyfunction]
fn first_order(q: u64, m: i64, b: f64, potential: &PyStepPotential) -> PyResult<f64> {
    perturbation::first_order(q, m, b, &potential.inner).map_err(to_py)
}

#[pyfunction]
fn fd_derivative(q: u64, m: i64, b: f64, potential: &PyStepPotential, h: f64) -> PyResult<f64> {
    perturbation::fd_derivative(q, m, b, &potential.inner, h).map_err(to_py)
}

/// `JacobianReport` JSON.
#[pyfunction]
fn jacobian_at_zero(n: u32, pairs: usize, q: u64, b: f64) -> PyResult<String> {
    perturbation::jacobian_at_zero(n, pairs, q, b).map(|r| r.to_json()).map_err(to_py)
}

/// `[(m, lambda)]` for `m_lo..=m_hi`.
#[pyfunction]
fn toeplitz_eigs(b: f64, q: u64, r: f64, m_lo: i64, m_hi: i64) -> PyResult<Vec<(i64, f64)>> {
    let spectrum = splitting::toeplitz_eigs(b, q, r, m_lo, m_hi).map_err(to_py)?;
    Ok(spectrum.lambdas.into_iter().collect())
}

/// CSV `t,m,E,displacement,first_order,resolved`; `sign` is `"+"` or `"-"`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn splitting_scan(b: f64, q: u64, sign: &str, c: f64, r: f64, t_grid: Vec<f64>, m_lo: i64, m_hi: i64) -> PyResult<String> {
    let sign: splitting::Sign = sign.parse().map_err(to_py)?;
    splitting::splitting_scan(b, q, sign, c, r, &t_grid, m_lo..=m_hi).map(|t| t.to_csv()).map_err(to_py)
}

/// Solves a `PinningProblem` given as JSON and returns the certificate JSON.
#[pyfunction]
fn solve_pinning(problem_json: &str) -> PyResult<String> {
    let problem = pinning::PinningProblem::from_json(problem_json).map_err(to_py)?;
    let (_, cert) = pinning::solve_pinning(&problem).map_err(to_py)?;
    Ok(cert.to_json())
}

#[pymodule]
fn landau_levels_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStepPotential>()?;
    m.add_function(wrap_pyfunction!(landau_level, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalue_near_level, m)?)?;
    m.add_function(wrap_pyfunction!(multiplicity_count, m)?)?;
    m.add_function(wrap_pyfunction!(first_order, m)?)?;
    m.add_function(wrap_pyfunction!(fd_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian_at_zero, m)?)?;
    m.add_function(wrap_pyfunction!(toeplitz_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(splitting_scan, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pinning, m)?)?;
    Ok(())
}
