//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers; superoperators act on density matrices in the same format.

use markovianity::criteria::{self, divisibility_report, trace_distance_series};
use markovianity::dynamics::{propagate, reduced_dynamics};
use markovianity::generators::{dephasing_generator, gksl_build, gksl_decompose_default, is_legitimate_gksl};
use markovianity::{
    operators, ComplexMatrix, DensityMatrix, EntropyKind, GkslData, MapFamily, MicroscopicModel, ScalarSignal,
    TimeDependentGenerator, TimeGrid,
};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<Complex64>>;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows) -> PyResult<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(PyValueError::new_err("expected a non-empty rectangular matrix"));
    }
    Ok(ComplexMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn state(rows: &Rows) -> PyResult<DensityMatrix> {
    DensityMatrix::new(to_matrix(rows)?).map_err(err)
}

fn signal(text: &str) -> PyResult<ScalarSignal> {
    ScalarSignal::parse(text).map_err(err)
}

/// A linear map on d x d matrices.
#[pyclass(name = "Superoperator", frozen)]
struct PySuperoperator(markovianity::Superoperator);

#[pymethods]
impl PySuperoperator {
    #[staticmethod]
    fn identity(d: usize) -> Self {
        Self(markovianity::Superoperator::identity(d))
    }

    #[staticmethod]
    fn transpose_map(d: usize) -> Self {
        Self(markovianity::Superoperator::transpose_map(d))
    }

    #[staticmethod]
    fn from_kraus(ops: Vec<Rows>) -> PyResult<Self> {
        let ops = ops.iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
        markovianity::Superoperator::from_kraus(&ops).map(Self).map_err(err)
    }

    /// GKSL generator from a Hamiltonian and a rate matrix in the Gell-Mann basis.
    #[staticmethod]
    fn gksl(hamiltonian: Rows, rates: Rows) -> PyResult<Self> {
        let data = GkslData::with_gell_mann(to_matrix(&hamiltonian)?, to_matrix(&rates)?).map_err(err)?;
        Ok(Self(gksl_build(&data)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Matrix in the column-stacking representation.
    fn matrix(&self) -> Rows {
        to_rows(self.0.matrix())
    }

    fn apply(&self, a: Rows) -> PyResult<Rows> {
        self.0.apply(&to_matrix(&a)?).map(|m| to_rows(&m)).map_err(err)
    }

    fn compose(&self, other: &PySuperoperator) -> PyResult<Self> {
        self.0.compose(&other.0).map(Self).map_err(err)
    }

    fn dual(&self) -> Self {
        Self(self.0.dual())
    }

    fn exp(&self) -> Self {
        Self(self.0.exp())
    }

    fn choi(&self) -> Rows {
        to_rows(&self.0.choi_raw())
    }

    fn choi_min_eigenvalue(&self) -> f64 {
        self.0.choi().min_eigenvalue()
    }

    #[pyo3(signature = (tol=None))]
    fn is_completely_positive(&self, tol: Option<f64>) -> bool {
        self.0.is_completely_positive(tol.unwrap_or(self.0.default_cp_tol())).is_cp
    }

    fn trace_preservation_defect(&self) -> f64 {
        self.0.trace_preservation_defect()
    }

    #[pyo3(signature = (tol=1e-9))]
    fn is_legitimate_generator(&self, tol: f64) -> bool {
        is_legitimate_gksl(&self.0, tol)
    }

    /// Hamiltonian, dissipator matrix G and rate matrix of a generator.
    fn gksl_decompose<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dec = gksl_decompose_default(&self.0).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("hamiltonian", to_rows(dec.hamiltonian.matrix()))?;
        out.set_item("g", to_rows(dec.g.matrix()))?;
        out.set_item("rates", to_rows(dec.rates.matrix()))?;
        out.set_item("min_rate_eigenvalue", dec.min_rate_eigenvalue())?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Superoperator(d={})", self.0.dim())
    }
}

/// Dynamical maps on a uniform time grid.
#[pyclass(name = "MapFamily", frozen)]
struct PyMapFamily(MapFamily);

fn generator_family(l: &TimeDependentGenerator, t_end: f64, n_steps: Option<usize>) -> PyResult<MapFamily> {
    let grid = match n_steps {
        Some(n) => TimeGrid::new(t_end, n),
        None => TimeGrid::with_default_steps(t_end),
    }
    .map_err(err)?;
    propagate(l, &grid).map_err(err)
}

#[pymethods]
impl PyMapFamily {
    /// Qubit dephasing with rate expressions in `t`.
    #[staticmethod]
    #[pyo3(signature = (omega, gamma, t_end, n_steps=None))]
    fn dephasing(omega: &str, gamma: &str, t_end: f64, n_steps: Option<usize>) -> PyResult<Self> {
        let l = dephasing_generator(signal(omega)?, signal(gamma)?);
        generator_family(&l, t_end, n_steps).map(Self)
    }

    /// Reduced dynamics of a system coupled to a finite reservoir.
    #[staticmethod]
    fn microscopic(
        d_s: usize,
        d_r: usize,
        hamiltonian: Rows,
        reservoir_state: Rows,
        t_end: f64,
        n_steps: usize,
    ) -> PyResult<Self> {
        let model = MicroscopicModel::new(d_s, d_r, to_matrix(&hamiltonian)?, state(&reservoir_state)?).map_err(err)?;
        let grid = TimeGrid::new(t_end, n_steps).map_err(err)?;
        reduced_dynamics(&model, &grid).map(Self).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn times(&self) -> Vec<f64> {
        self.0.grid().nodes()
    }

    fn map(&self, i: usize) -> PyResult<PySuperoperator> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(PySuperoperator(self.0.map(i).clone()))
    }

    /// Trace distance of two evolved states and its violation intervals.
    fn trace_distance<'py>(&self, py: Python<'py>, rho: Rows, sigma: Rows) -> PyResult<Bound<'py, PyDict>> {
        let s = trace_distance_series(&self.0, &state(&rho)?, &state(&sigma)?).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("values", s.values().to_vec())?;
        out.set_item("violation_intervals", s.violation_intervals().to_vec())?;
        out.set_item("revivals", s.revivals())?;
        Ok(out)
    }

    /// CP-divisibility test; uses the generator when there is one and
    /// propagator inversion otherwise.
    #[pyo3(signature = (delta=None, tol=1e-9))]
    fn divisibility<'py>(&self, py: Python<'py>, delta: Option<f64>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let grid = *self.0.grid();
        let report = match self.0.generator() {
            Some(l) => divisibility_report(l, &grid, delta.unwrap_or(grid.step()), tol).map_err(err)?,
            None => criteria::divisibility_report_from_maps(&self.0, tol),
        };
        let out = PyDict::new(py);
        out.set_item("verdict", report.verdict.as_str())?;
        out.set_item("times", report.times.clone())?;
        out.set_item("min_choi", report.min_choi.clone())?;
        out.set_item("g", report.g.clone())?;
        out.set_item("g_max", report.g_max())?;
        out.set_item("violation_intervals", report.violation_intervals.clone())?;
        Ok(out)
    }
}

#[pyfunction]
fn trace_norm(a: Rows) -> PyResult<f64> {
    operators::trace_norm(&to_matrix(&a)?).map_err(err)
}

#[pyfunction]
fn fidelity(rho: Rows, sigma: Rows) -> PyResult<f64> {
    operators::fidelity(&state(&rho)?, &state(&sigma)?).map_err(err)
}

#[pyfunction]
fn trace_distance(rho: Rows, sigma: Rows) -> PyResult<f64> {
    operators::trace_distance(&state(&rho)?, &state(&sigma)?).map_err(err)
}

/// `kind` is "vonneumann", "renyi" or "tsallis"; `order` is alpha or q.
#[pyfunction]
#[pyo3(signature = (rho, sigma, kind="vonneumann", order=None))]
fn relative_entropy(rho: Rows, sigma: Rows, kind: &str, order: Option<f64>) -> PyResult<f64> {
    let kind = match (kind, order) {
        ("vonneumann", _) => EntropyKind::VonNeumann,
        ("renyi", Some(a)) => EntropyKind::Renyi(a),
        ("tsallis", Some(q)) => EntropyKind::Tsallis(q),
        _ => return Err(PyValueError::new_err("unknown entropy kind or missing order")),
    };
    let kind = kind.validate().map_err(err)?;
    criteria::relative_entropy(&to_matrix(&rho)?, &to_matrix(&sigma)?, kind).map_err(err)
}

#[pymodule]
fn markovianity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySuperoperator>()?;
    m.add_class::<PyMapFamily>()?;
    m.add_function(wrap_pyfunction!(trace_norm, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    Ok(())
}
