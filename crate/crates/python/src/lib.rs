//! Python bindings. Tensors are exposed as opaque objects with `entry`,
//! `to_dense` (nested lists) and factor accessors; reports come back as dicts.

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use rangesep::elliptic::{impulse_density, regularized_poisson};
use rangesep::operators::{build_delta, interior_mass, interior_support_radius, KroneckerLaplacian};
use rangesep::oracles::{green_eval, AnalyticKernel, KernelValue};
use rangesep::range_sep::{project, AssembleOptions, Projection};
use rangesep::{
    assemble_multiparticle, build_sinc_rule, convergence_sweep, CanonicalTensor3, Error, GridSpec, Particle, ParticleSystem,
    QuadratureRule, RadialKernel, RsSplit, SplitCriterion,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotConverged { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::IndexOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializable value as a Python object, through the `json` module.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn kernel_from(name: &str, kappa: f64, beta: f64) -> PyResult<RadialKernel> {
    Ok(match name {
        "newton" => RadialKernel::newton(),
        "coulomb" => RadialKernel::coulomb(),
        "yukawa" => RadialKernel::yukawa(kappa),
        "invpow" => RadialKernel::inverse_power(beta),
        _ => return Err(PyValueError::new_err(format!("unknown kernel {name:?}"))),
    })
}

fn projection_from(name: &str) -> PyResult<Projection> {
    Ok(match name {
        "integral" => Projection::Integral,
        "average" => Projection::Average,
        "collocation" => Projection::Collocation,
        _ => return Err(PyValueError::new_err(format!("unknown projection {name:?}"))),
    })
}

fn criterion_from(name: &str) -> PyResult<SplitCriterion> {
    Ok(match name {
        "max" => SplitCriterion::MaxNorm,
        "l1" => SplitCriterion::L1Norm,
        _ => return Err(PyValueError::new_err(format!("unknown criterion {name:?}"))),
    })
}

fn particles_from(items: Vec<(f64, f64, f64, f64)>) -> ParticleSystem {
    ParticleSystem::new(items.into_iter().map(|(x, y, z, q)| Particle { center: [x, y, z], charge: q }).collect())
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(GridSpec);

#[pymethods]
impl PyGrid {
    /// `n` cells per axis on `[-b, b]^3`.
    #[new]
    fn new(b: f64, n: usize) -> PyResult<Self> {
        GridSpec::new(b, n).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    fn coords(&self) -> Vec<f64> {
        self.0.coords()
    }

    fn doubled(&self) -> Self {
        PyGrid(self.0.doubled())
    }

    fn __repr__(&self) -> String {
        format!("Grid(b={}, n={})", self.0.b, self.0.n)
    }
}

#[pyclass(name = "QuadratureRule", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRule(QuadratureRule);

#[pymethods]
impl PyRule {
    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn ks(&self) -> Vec<i64> {
        self.0.ks.clone()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.nodes.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    /// Gaussian-sum value at radius `r`, kernel scale included.
    fn eval(&self, r: f64) -> f64 {
        self.0.eval(r)
    }

    fn exact(&self, r: f64) -> f64 {
        self.0.kernel.exact(r)
    }

    fn max_rel_error(&self, rs: Vec<f64>) -> f64 {
        self.0.max_rel_error(&rs)
    }
}

#[pyclass(name = "CanonicalTensor", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTensor(CanonicalTensor3);

#[pymethods]
impl PyTensor {
    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn entry(&self, i: usize, j: usize, k: usize) -> PyResult<f64> {
        self.0.entry([i, j, k]).map_err(py_err)
    }

    /// Values as `t[i][j][k]`.
    fn to_dense(&self) -> Vec<Vec<Vec<f64>>> {
        let d = self.0.to_dense();
        let n = self.0.n();
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| d[[i, j, k]]).collect()).collect()).collect()
    }

    /// Factor matrix of `mode` as a list of columns.
    fn factor(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        let f = self.0.factors.get(mode).ok_or_else(|| PyIndexError::new_err("mode must be 0, 1 or 2"))?;
        Ok(f.column_iter().map(|c| c.iter().copied().collect()).collect())
    }

    fn coeffs(&self) -> Vec<f64> {
        self.0.coeffs.iter().copied().collect()
    }

    fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    fn __add__(&self, other: &PyTensor) -> PyResult<Self> {
        self.0.add(&other.0).map(PyTensor).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("CanonicalTensor(n={}, rank={})", self.0.n(), self.0.rank())
    }
}

#[pyclass(name = "Split", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySplit(RsSplit);

#[pymethods]
impl PySplit {
    #[getter]
    fn r_l(&self) -> usize {
        self.0.r_l
    }

    #[getter]
    fn r_s(&self) -> usize {
        self.0.r_s()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    fn gamma(&self) -> usize {
        self.0.gamma()
    }

    #[getter]
    fn long(&self) -> PyTensor {
        PyTensor(self.0.long.clone())
    }

    #[getter]
    fn short(&self) -> PyTensor {
        PyTensor(self.0.short.clone())
    }

    fn full(&self) -> PyTensor {
        PyTensor(self.0.full())
    }
}

#[pyfunction]
#[pyo3(signature = (kernel = "newton", m = 24, c0 = 3.0, kappa = 1.0, beta = 1.0))]
fn sinc_rule(kernel: &str, m: usize, c0: f64, kappa: f64, beta: f64) -> PyResult<PyRule> {
    build_sinc_rule(kernel_from(kernel, kappa, beta)?, m, c0).map(PyRule).map_err(py_err)
}

/// `[(M, max relative error on r >= a)]`.
#[pyfunction]
#[pyo3(signature = (ms, r_grid, a, kernel = "newton", c0 = 3.0, kappa = 1.0, beta = 1.0))]
fn sweep(ms: Vec<usize>, r_grid: Vec<f64>, a: f64, kernel: &str, c0: f64, kappa: f64, beta: f64) -> PyResult<Vec<(usize, f64)>> {
    let rows = convergence_sweep(kernel_from(kernel, kappa, beta)?, &ms, &r_grid, a, c0).map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.m, r.max_rel_error)).collect())
}

#[pyfunction(name = "project")]
#[pyo3(signature = (rule, grid, projection = "integral"))]
fn project_py(rule: &PyRule, grid: &PyGrid, projection: &str) -> PyResult<PyTensor> {
    Ok(PyTensor(project(&rule.0, &grid.0, projection_from(projection)?)))
}

/// Splits by the criterion, or at `r_l` when given.
#[pyfunction]
#[pyo3(signature = (rule, grid, sigma = 1.0, delta = 1e-4, criterion = "max", projection = "average", r_l = None))]
fn split(rule: &PyRule, grid: &PyGrid, sigma: f64, delta: f64, criterion: &str, projection: &str, r_l: Option<usize>) -> PyResult<PySplit> {
    let p = projection_from(projection)?;
    let s = match r_l {
        Some(r) => RsSplit::at(&rule.0, &grid.0, p, r, delta),
        None => RsSplit::by_criterion(&rule.0, &grid.0, p, sigma, delta, criterion_from(criterion)?),
    };
    s.map(PySplit).map_err(py_err)
}

/// Grid delta `-A P` of a split, Dirichlet Laplacian. Returns a dict with
/// the three parts and their interior mass and support radii.
#[pyfunction]
#[pyo3(signature = (split, eps = None))]
fn delta<'py>(py: Python<'py>, split: &PySplit, eps: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let g = split.0.grid();
    let d = build_delta(&split.0, &KroneckerLaplacian::dirichlet(g), eps).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("interior_mass", interior_mass(&d.full))?;
    out.set_item("long_support_radius", interior_support_radius(&d.long, [0.0; 3], 1e-3))?;
    out.set_item("short_support_radius", interior_support_radius(&d.short, [0.0; 3], 1e-3))?;
    out.set_item("full", PyTensor(d.full))?;
    out.set_item("short", PyTensor(d.short))?;
    out.set_item("long", PyTensor(d.long))?;
    Ok(out)
}

/// Potential of `[(x, y, z, q)]` in range-separated form; returns the
/// assembly report as a dict plus the compressed long-range tensor.
#[pyfunction]
#[pyo3(signature = (particles, grid, m = 24, c0 = 3.0, sigma = 1.0, delta = 1e-4, eps = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn assemble(
    py: Python<'_>,
    particles: Vec<(f64, f64, f64, f64)>,
    grid: &PyGrid,
    m: usize,
    c0: f64,
    sigma: f64,
    delta: f64,
    eps: f64,
) -> PyResult<(Py<PyAny>, PyTensor)> {
    let sys = particles_from(particles);
    let rule = build_sinc_rule(RadialKernel::coulomb(), m, c0).map_err(py_err)?;
    let reference = RsSplit::by_criterion(&rule, &grid.0.doubled(), Projection::Average, sigma, delta, SplitCriterion::MaxNorm).map_err(py_err)?;
    let (rs, _, report) = assemble_multiparticle(&reference, &sys, &grid.0, &AssembleOptions::new(eps)).map_err(py_err)?;
    Ok((to_py(py, &report)?, PyTensor(rs.long)))
}

/// Regularized Poisson solve for point charges; returns the report dict and
/// the solution as nested lists.
#[pyfunction]
#[pyo3(signature = (particles, grid, m = 24, c0 = 3.0, sigma = 0.4, delta = 1e-4))]
#[allow(clippy::type_complexity)]
fn solve_poisson(
    py: Python<'_>,
    particles: Vec<(f64, f64, f64, f64)>,
    grid: &PyGrid,
    m: usize,
    c0: f64,
    sigma: f64,
    delta: f64,
) -> PyResult<(Py<PyAny>, Vec<Vec<Vec<f64>>>)> {
    let sys = particles_from(particles);
    let rule = build_sinc_rule(RadialKernel::coulomb(), m, c0).map_err(py_err)?;
    let f = impulse_density(&grid.0, &sys).map_err(py_err)?;
    let s = RsSplit::by_criterion(&rule, &grid.0.doubled(), Projection::Average, sigma, delta, SplitCriterion::MaxNorm).map_err(py_err)?;
    let sol = regularized_poisson(&f, &s).map_err(py_err)?;
    let u = sol.u.to_dense();
    let n = grid.0.n;
    let nested = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| u[[i, j, k]]).collect()).collect()).collect();
    Ok((to_py(py, &sol.report)?, nested))
}

/// Closed-form kernel value at `x`: a float, a 3-vector or a 3×3 matrix.
#[pyfunction]
#[pyo3(signature = (kernel, x, lam = 1.0, d = 3, kappa = 0.0, mu = 1.0, nu = 1.0, drift = (0.0, 0.0, 0.0)))]
#[allow(clippy::too_many_arguments)]
fn oracle(
    py: Python<'_>,
    kernel: &str,
    x: (f64, f64, f64),
    lam: f64,
    d: usize,
    kappa: f64,
    mu: f64,
    nu: f64,
    drift: (f64, f64, f64),
) -> PyResult<Py<PyAny>> {
    let k = match kernel {
        "erf_potential" => AnalyticKernel::ErfPotential { lambda: lam },
        "gd" => AnalyticKernel::GdRadial { d, lambda: lam },
        "yukawa" => AnalyticKernel::Yukawa { kappa },
        "biharmonic" => AnalyticKernel::Biharmonic,
        "kelvin" => AnalyticKernel::KelvinSomigliana { lambda: lam, mu },
        "stokeslet" => AnalyticKernel::Stokeslet { nu },
        "stokes_pressure" => AnalyticKernel::StokesPressure,
        "eta0" => AnalyticKernel::Eta0 { b: [drift.0, drift.1, drift.2] },
        _ => return Err(PyValueError::new_err(format!("unknown kernel {kernel:?}"))),
    };
    match green_eval(&k, [x.0, x.1, x.2]).map_err(py_err)? {
        KernelValue::Scalar(v) => to_py(py, &v),
        KernelValue::Vector(v) => to_py(py, &v),
        KernelValue::Matrix(m) => to_py(py, &m),
    }
}

#[pymodule(name = "rangesep")]
fn rangesep_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyRule>()?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PySplit>()?;
    m.add_function(wrap_pyfunction!(sinc_rule, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(project_py, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(solve_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
