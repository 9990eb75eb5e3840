//! Python bindings: grids, cone tests, Dirichlet solves, capacities and
//! config-driven runs. Functions of `z` are passed as expression strings in
//! the same language as the JSON configurations.

use std::path::Path;
use std::sync::Arc;

use hessian_core::capacity::{cap_estimate, GridSet};
use hessian_core::cli;
use hessian_core::config::{parse_config_str, Overrides};
use hessian_core::expr::{Env, Expr};
use hessian_core::forms::{self, MeasureDensity};
use hessian_core::grid::{BallGrid, BoundaryFn, GridFunction, HermitianField};
use hessian_core::hermitian::{self, EigenvalueVector, HermitianMatrix};
use hessian_core::solver::{solve_dirichlet, SolverConfig};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: hessian_core::Error) -> PyErr {
    match e {
        hessian_core::Error::Solver(_) | hessian_core::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse(src: &str) -> PyResult<Expr> {
    Expr::parse(src).map_err(|e| PyValueError::new_err(format!("cannot parse `{src}`: {e}")))
}

fn boundary(src: &str) -> PyResult<BoundaryFn> {
    let e = parse(src)?;
    Ok(BoundaryFn::new(move |x| e.eval(&Env::at(x))))
}

fn omega_field(grid: &Arc<BallGrid>, c: f64) -> PyResult<HermitianField> {
    HermitianField::constant(grid, HermitianMatrix::scaled_identity(grid.n(), c)).map_err(core_err)
}

/// Uniform lattice on the unit ball of complex dimension `n` with spacing `1/divisions`.
#[pyclass(frozen, module = "hessian_lab")]
struct Grid {
    inner: Arc<BallGrid>,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(n: usize, divisions: usize) -> PyResult<Self> {
        Ok(Self { inner: BallGrid::new(n, divisions).map_err(core_err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn divisions(&self) -> usize {
        self.inner.divisions()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Real coordinates `(x1, y1[, x2, y2])` of each interior point.
    fn points(&self) -> Vec<Vec<f64>> {
        let d = self.inner.real_dim();
        (0..self.inner.len()).map(|i| self.inner.point(i)[..d].to_vec()).collect()
    }

    /// Samples an expression at every interior point.
    fn sample(&self, expr: &str) -> PyResult<Vec<f64>> {
        let e = parse(expr)?;
        let d = self.inner.real_dim();
        Ok((0..self.inner.len()).map(|i| e.eval(&Env::at(&self.inner.point(i)[..d]))).collect())
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, divisions={}, points={})", self.inner.n(), self.inner.divisions(), self.inner.len())
    }
}

/// `σ_k` of a spectrum.
#[pyfunction]
fn sigma(eigenvalues: Vec<f64>, k: usize) -> PyResult<f64> {
    let l = EigenvalueVector::new(&eigenvalues).map_err(core_err)?;
    hermitian::sigma_k(&l, k).map_err(core_err)
}

/// Γ_m membership of a spectrum, open cone when `strict`.
#[pyfunction]
#[pyo3(signature = (eigenvalues, m, strict = false))]
fn in_gamma(eigenvalues: Vec<f64>, m: usize, strict: bool) -> PyResult<bool> {
    let l = EigenvalueVector::new(&eigenvalues).map_err(core_err)?;
    hermitian::in_gamma_m(&l, m, strict).map_err(core_err)
}

/// Normalized polarized `σ_m` of `m` Hermitian matrices given as nested lists of complex numbers.
#[pyfunction]
fn mixed_sigma(matrices: Vec<Vec<Vec<Complex64>>>, n: usize) -> PyResult<f64> {
    let mats = matrices.iter().map(|rows| HermitianMatrix::new(rows)).collect::<Result<Vec<_>, _>>().map_err(core_err)?;
    forms::mixed_sigma(&mats, n).map_err(core_err)
}

/// Solves `H_{m,ω}(u) = f` with `u = phi` on the sphere and `ω = omega·I`.
#[pyfunction]
#[pyo3(signature = (grid, f = "1", phi = "0", m = 1, omega = 0.0, tol = None))]
fn solve<'py>(
    py: Python<'py>,
    grid: &Grid,
    f: &str,
    phi: &str,
    m: usize,
    omega: f64,
    tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid.inner.clone();
    let fe = parse(f)?;
    let density = MeasureDensity::from_fn(&g, |x| fe.eval(&Env::at(x))).map_err(core_err)?;
    let phi = boundary(phi)?;
    let omega = omega_field(&g, omega)?;
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol {
        cfg.tolerance = t;
    }
    let rep = py.detach(|| solve_dirichlet(&density, &phi, &omega, m, &cfg)).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("values", rep.solution.values().to_vec())?;
    out.set_item("converged", rep.converged)?;
    out.set_item("iterations", rep.iterations)?;
    out.set_item("residual", rep.residual)?;
    out.set_item("violations", rep.violations)?;
    out.set_item("wall_time_s", rep.wall_time_s)?;
    Ok(out)
}

/// Density of `H_{m,ω}(u)` relative to `β^n` and the closed-cone mask.
/// `u` is an expression or a list of interior values.
#[pyfunction]
#[pyo3(signature = (grid, u, m = 1, omega = 0.0, phi = None))]
fn hessian_measure<'py>(
    py: Python<'py>,
    grid: &Grid,
    u: &Bound<'py, PyAny>,
    m: usize,
    omega: f64,
    phi: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid.inner.clone();
    let func = if let Ok(src) = u.extract::<String>() {
        let e = parse(&src)?;
        let b = match phi {
            Some(p) => boundary(p)?,
            None => boundary(&src)?,
        };
        let values: Vec<f64> = (0..g.len()).map(|i| e.eval(&Env::at(&g.point(i)[..g.real_dim()]))).collect();
        GridFunction::new(g.clone(), values, b).map_err(core_err)?
    } else {
        let values: Vec<f64> = u.extract()?;
        GridFunction::new(g.clone(), values, boundary(phi.unwrap_or("0"))?).map_err(core_err)?
    };
    let d = forms::hessian_measure(&func, &omega_field(&g, omega)?, m).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("density", d.values().to_vec())?;
    out.set_item("admissible", d.admissible().map(|a| a.to_vec()))?;
    out.set_item("total_mass", d.total_mass())?;
    Ok(out)
}

/// Capacity estimate of the closed ball `{‖z − center‖ ≤ radius}` on the grid.
#[pyfunction]
#[pyo3(signature = (grid, radius, m = 1, omega = 0.0, center = None))]
fn capacity(py: Python<'_>, grid: &Grid, radius: f64, m: usize, omega: f64, center: Option<Vec<f64>>) -> PyResult<f64> {
    let g = grid.inner.clone();
    let set = GridSet::ball(&g, center.as_deref().unwrap_or(&[]), radius);
    let omega = omega_field(&g, omega)?;
    py.detach(|| cap_estimate(&set, &omega, m)).map(|c| c.value).map_err(core_err)
}

/// Runs a JSON configuration into `out_dir`, as the command-line tool does.
#[pyfunction]
#[pyo3(signature = (config, out_dir, force = false, seed = None))]
fn run_config<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: &str,
    force: bool,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let overrides = Overrides { seed, ..Overrides::default() };
    let cfg = parse_config_str(config, &overrides).map_err(|e| value_err(cli::CliError::from(e).to_json()))?;
    let outcome = py.detach(|| cli::run(&cfg, Path::new(out_dir), force)).map_err(|e| {
        if e.exit_code() == cli::EXIT_CONFIG {
            value_err(e.to_json())
        } else {
            PyRuntimeError::new_err(e.to_json())
        }
    })?;
    let out = PyDict::new(py);
    out.set_item("success", outcome.success)?;
    out.set_item("summary", outcome.summary)?;
    out.set_item("artifacts", outcome.artifacts)?;
    Ok(out)
}

#[pymodule]
fn hessian_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(in_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(hessian_measure, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
