//! Python bindings: meshes, the box-constrained QP solver, species
//! recovery, violation statistics and the benchmark pipelines.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use reactfem::analysis;
use reactfem::benchmarks::{self, BenchmarkId};
use reactfem::boxqp::{self, BoxQp, KktResiduals, QpOptions, QpSolution, DEFAULT_TOL};
use reactfem::reaction::{self, Level, RunOptions, TimeControl};
use reactfem::{Bounds, CsrMatrix, ElementKind, Formulation, Quantity, Stoichiometry};

fn to_py(e: reactfem::Error) -> PyErr {
    use reactfem::Error as E;
    match e {
        E::NotPositiveDefinite { .. } | E::QpIterationLimit { .. } | E::Io(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Structured mesh of `tri3` or `quad4` elements.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: reactfem::Mesh,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    #[pyo3(signature = (lengths, seeds, kind = "quad4", origin = (0.0, 0.0)))]
    fn structured(lengths: (f64, f64), seeds: (usize, usize), kind: &str, origin: (f64, f64)) -> PyResult<Self> {
        let kind: ElementKind = kind.parse().map_err(to_py)?;
        let inner = reactfem::generate_structured([origin.0, origin.1], [lengths.0, lengths.1], [seeds.0, seeds.1], kind)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Default mesh of a registered benchmark.
    #[staticmethod]
    #[pyo3(signature = (benchmark, kind = "quad4"))]
    fn for_benchmark(benchmark: &str, kind: &str) -> PyResult<Self> {
        let id: BenchmarkId = benchmark.parse().map_err(to_py)?;
        let kind: ElementKind = kind.parse().map_err(to_py)?;
        Ok(Self { inner: benchmarks::default_mesh(id, kind).map_err(to_py)? })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes.iter().map(|p| (p[0], p[1])).collect()
    }

    #[getter]
    fn elements(&self) -> Vec<Vec<usize>> {
        self.inner.elements.clone()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    /// Writes one nodal field as legacy ASCII VTK.
    #[pyo3(signature = (path, values, name = "c"))]
    fn write_vtk(&self, path: &str, values: Vec<f64>, name: &str) -> PyResult<()> {
        reactfem::io::write_vtk_file(path.as_ref(), &self.inner, name, name, &values).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Mesh({} nodes, {} {} elements)", self.inner.num_nodes(), self.inner.num_elements(), self.inner.kind)
    }
}

fn kkt_dict<'py>(py: Python<'py>, k: &KktResiduals) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("stationarity", k.stationarity)?;
    d.set_item("primal_feasibility", k.primal_feasibility)?;
    d.set_item("dual_feasibility", k.dual_feasibility)?;
    d.set_item("complementarity", k.complementarity)?;
    d.set_item("scale", k.scale)?;
    d.set_item("max_relative", k.max_relative())?;
    Ok(d)
}

fn qp_dict<'py>(py: Python<'py>, s: &QpSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("c", s.c.clone())?;
    d.set_item("lambda_min", s.lambda_min.clone())?;
    d.set_item("lambda_max", s.lambda_max.clone())?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("kkt", kkt_dict(py, &s.kkt)?)?;
    Ok(d)
}

/// Minimizes ½cᵀHc − gᵀc over `lower ≤ c ≤ upper` for a dense symmetric
/// positive-definite `hessian` given as a list of rows.
#[pyfunction]
#[pyo3(signature = (hessian, linear, lower, upper, warm_start = None, tol = DEFAULT_TOL, max_iterations = 500))]
#[allow(clippy::too_many_arguments)]
fn solve_box_qp<'py>(
    py: Python<'py>,
    hessian: Vec<Vec<f64>>,
    linear: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    warm_start: Option<Vec<f64>>,
    tol: f64,
    max_iterations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let n = linear.len();
    if hessian.len() != n || hessian.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("hessian must be {n}x{n}")));
    }
    let problem = BoxQp::new(CsrMatrix::from_dense(&hessian), linear, lower, upper).map_err(to_py)?;
    let opts = QpOptions { tol, max_iterations };
    let sol = py.detach(|| boxqp::solve(&problem, warm_start.as_deref(), &opts)).map_err(to_py)?;
    qp_dict(py, &sol)
}

/// Species `(A, B, C)` from invariant values.
#[pyfunction]
#[pyo3(signature = (f, g, stoichiometry, eps = f64::EPSILON))]
fn recover_species(
    f: Vec<f64>,
    g: Vec<f64>,
    stoichiometry: (f64, f64, f64),
    eps: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if f.len() != g.len() {
        return Err(PyValueError::new_err("invariant arrays differ in length"));
    }
    let st = Stoichiometry::new(stoichiometry.0, stoichiometry.1, stoichiometry.2).map_err(to_py)?;
    let mut out = (Vec::with_capacity(f.len()), Vec::with_capacity(f.len()), Vec::with_capacity(f.len()));
    for (cf, cg) in f.iter().zip(&g) {
        let (a, b, c) = reaction::recover_point(*cf, *cg, &st, eps);
        out.0.push(a);
        out.1.push(b);
        out.2.push(c);
    }
    Ok(out)
}

/// Min, max, `100·min/max` and the percentage of entries below `lower`.
#[pyfunction]
#[pyo3(signature = (values, lower = 0.0))]
fn violation_stats<'py>(py: Python<'py>, values: Vec<f64>, lower: f64) -> PyResult<Bound<'py, PyDict>> {
    let s = analysis::violation_stats(&values, Bounds::new(lower, f64::INFINITY).map_err(to_py)?);
    let d = PyDict::new(py);
    d.set_item("min", s.min)?;
    d.set_item("max", s.max)?;
    d.set_item("min_over_max_percent", s.min_over_max_percent)?;
    d.set_item("percent_nodes_violating", s.percent_nodes_violating)?;
    Ok(d)
}

#[pyfunction]
fn benchmark_ids() -> Vec<&'static str> {
    BenchmarkId::ALL.iter().map(|b| b.as_str()).collect()
}

fn level_dict<'py>(py: Python<'py>, level: &Level) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("time", level.time)?;
    for q in [Quantity::F, Quantity::G, Quantity::A, Quantity::B, Quantity::C] {
        d.set_item(q.name(), level.field(q).values.clone())?;
    }
    if let (Some(f), Some(g)) = (&level.qp_f, &level.qp_g) {
        for field in &level.multipliers {
            d.set_item(field.quantity.name(), field.values.clone())?;
        }
        d.set_item("kkt_F", kkt_dict(py, &f.kkt)?)?;
        d.set_item("kkt_G", kkt_dict(py, &g.kkt)?)?;
        d.set_item("iterations", (f.iterations, g.iterations))?;
    }
    Ok(d)
}

/// Solves a registered benchmark; returns one dict per time level (a single
/// one for steady problems) keyed by quantity name.
#[pyfunction]
#[pyo3(signature = (benchmark, seeds, kind = "quad4", formulation = "constrained", dt = None, horizon = None, eps = None))]
#[allow(clippy::too_many_arguments)]
fn run_benchmark<'py>(
    py: Python<'py>,
    benchmark: &str,
    seeds: usize,
    kind: &str,
    formulation: &str,
    dt: Option<f64>,
    horizon: Option<f64>,
    eps: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let id: BenchmarkId = benchmark.parse().map_err(to_py)?;
    let kind: ElementKind = kind.parse().map_err(to_py)?;
    let form: Formulation = formulation.parse().map_err(to_py)?;
    let spec = benchmarks::build(id, [seeds, seeds], kind, dt, horizon).map_err(to_py)?;
    let mut opts = RunOptions::new(form);
    if let Some(eps) = eps {
        opts.eps = eps;
    }
    let levels = py
        .detach(|| match spec.time {
            TimeControl::Steady => reaction::run_steady(&spec, &opts).map(|l| vec![l]),
            TimeControl::Transient { .. } => reaction::run_transient(&spec, &opts).map(|o| o.levels),
        })
        .map_err(to_py)?;
    levels.iter().map(|l| level_dict(py, l)).collect()
}

/// Runs the command-line front end with `args` (without the program name)
/// and returns its exit status.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let full: Vec<String> = std::iter::once("reactfem".to_string()).chain(args).collect();
    py.detach(|| reactfem::cli::main_with_args(full))
}

#[pymodule]
fn pyreactfem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(solve_box_qp, m)?)?;
    m.add_function(wrap_pyfunction!(recover_species, m)?)?;
    m.add_function(wrap_pyfunction!(violation_stats, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_ids, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("DEFAULT_TOL", DEFAULT_TOL)?;
    Ok(())
}
