//! Python bindings for the main qonline types and operations: states,
//! measurements, the online learners, the postselection learner, the bound
//! calculators, and the experiment harness (driven by JSON configs).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qonline::bounds;
use qonline::harness::{self, ExperimentConfig};
use qonline::learn::{self, Variant};
use qonline::loss::{LossKind, LossSpec};
use qonline::postsel;
use qonline::qmodel::{self, DensityMatrix, MatrixJson, Measurement, RngStream};
use qonline::spectra;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_variant(name: &str) -> PyResult<Variant> {
    match name {
        "rftl" => Ok(Variant::Rftl),
        "mmw" => Ok(Variant::Mmw),
        other => Err(err(format!("unknown variant {other:?}, expected rftl|mmw"))),
    }
}

fn parse_loss(name: &str) -> PyResult<LossKind> {
    match name {
        "l1" => Ok(LossKind::L1),
        "l2" => Ok(LossKind::L2),
        other => Err(err(format!("unknown loss {other:?}, expected l1|l2"))),
    }
}

fn matrix_lists(m: &spectra::Matrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let json = MatrixJson::from_matrix(m);
    (json.re, json.im)
}

fn qubits_for_dim(dim: usize) -> PyResult<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(err(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Trace-1 PSD Hermitian matrix on n qubits.
#[pyclass(name = "DensityMatrix", from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Build from real and imaginary parts (row-major, dim = 2^n).
    #[staticmethod]
    fn from_lists(re: Vec<Vec<f64>>, im: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = re.len();
        let qubits = qubits_for_dim(dim)?;
        let json = MatrixJson { dim, re, im };
        Ok(PyDensityMatrix {
            inner: json.to_density(qubits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn maximally_mixed(qubits: usize) -> PyResult<Self> {
        Ok(PyDensityMatrix {
            inner: DensityMatrix::maximally_mixed(qubits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn basis_state(qubits: usize, index: usize) -> PyResult<Self> {
        Ok(PyDensityMatrix {
            inner: DensityMatrix::basis_state(qubits, index).map_err(err)?,
        })
    }

    /// Seeded Ginibre-normalized random state.
    #[staticmethod]
    fn random(qubits: usize, seed: u64) -> PyResult<Self> {
        let mut rng = RngStream::from_seed(seed);
        Ok(PyDensityMatrix {
            inner: qmodel::random_density(qubits, &mut rng).map_err(err)?,
        })
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn to_lists(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        matrix_lists(self.inner.matrix().matrix())
    }

    /// von Neumann entropy in nats.
    fn entropy(&self) -> PyResult<f64> {
        spectra::von_neumann_entropy(self.inner.matrix()).map_err(err)
    }

    /// Trace distance ||rho - sigma||_Tr / 2.
    fn trace_distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        harness::trace_distance_gap(&self.inner, &other.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(qubits={}, dim={})", self.inner.qubits(), self.inner.dim())
    }
}

/// Two-outcome measurement: Hermitian with spectrum in [0, 1].
#[pyclass(name = "Measurement", from_py_object)]
#[derive(Clone)]
struct PyMeasurement {
    inner: Measurement,
}

#[pymethods]
impl PyMeasurement {
    #[staticmethod]
    fn from_lists(re: Vec<Vec<f64>>, im: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = re.len();
        let qubits = qubits_for_dim(dim)?;
        let json = MatrixJson { dim, re, im };
        Ok(PyMeasurement {
            inner: json.to_measurement(qubits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn identity(qubits: usize) -> PyResult<Self> {
        Ok(PyMeasurement {
            inner: Measurement::identity(qubits).map_err(err)?,
        })
    }

    #[staticmethod]
    fn basis_projector(qubits: usize, index: usize) -> PyResult<Self> {
        Ok(PyMeasurement {
            inner: Measurement::basis_projector(qubits, index).map_err(err)?,
        })
    }

    /// Seeded random measurement (Haar-ish basis, uniform spectrum).
    #[staticmethod]
    fn random(qubits: usize, seed: u64) -> PyResult<Self> {
        let mut rng = RngStream::from_seed(seed);
        Ok(PyMeasurement {
            inner: qmodel::random_measurement(qubits, &mut rng).map_err(err)?,
        })
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn to_lists(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        matrix_lists(self.inner.matrix().matrix())
    }

    fn complement(&self) -> PyMeasurement {
        PyMeasurement {
            inner: self.inner.complement(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Measurement(qubits={}, dim={})", self.inner.qubits(), self.inner.dim())
    }
}

/// Online learner over density matrices (rftl or mmw update rule).
#[pyclass(name = "Learner")]
struct PyLearner {
    state: learn::LearnerState,
}

#[pymethods]
impl PyLearner {
    /// eta defaults to the theorem value for the given horizon.
    #[new]
    #[pyo3(signature = (qubits, variant, horizon, lipschitz = 1.0, eta = None))]
    fn new(
        qubits: usize,
        variant: &str,
        horizon: u64,
        lipschitz: f64,
        eta: Option<f64>,
    ) -> PyResult<Self> {
        let variant = parse_variant(variant)?;
        let eta = eta.unwrap_or_else(|| learn::default_eta(variant, horizon.max(1), qubits, lipschitz));
        Ok(PyLearner {
            state: learn::initial_state(qubits, eta, lipschitz, variant).map_err(err)?,
        })
    }

    /// Tr(E omega_t) for the current hypothesis.
    fn predict(&self, e: &PyMeasurement) -> PyResult<f64> {
        qmodel::born_probability(&e.inner, self.state.iterate()).map_err(err)
    }

    /// Feed one (measurement, target) pair through the configured loss and
    /// update; returns the pre-update prediction.
    #[pyo3(signature = (e, target, loss = "l1"))]
    fn step(&mut self, e: &PyMeasurement, target: f64, loss: &str) -> PyResult<f64> {
        let spec = LossSpec::new(parse_loss(loss)?, target).map_err(err)?;
        let prediction = qmodel::born_probability(&e.inner, self.state.iterate()).map_err(err)?;
        let grad = learn::gradient(spec, &e.inner, self.state.iterate()).map_err(err)?;
        self.state = learn::update(&self.state, &grad).map_err(err)?;
        Ok(prediction)
    }

    /// Mistake-filtered step: update only when |prediction - b| > 2 eps / 3.
    /// Returns (prediction, updated).
    fn mistake_step(&mut self, e: &PyMeasurement, b: f64, epsilon: f64) -> PyResult<(f64, bool)> {
        let step = learn::mistake_filtered_step(&self.state, &e.inner, b, epsilon).map_err(err)?;
        self.state = step.state;
        Ok((step.predicted, step.updated))
    }

    fn iterate(&self) -> PyDensityMatrix {
        PyDensityMatrix {
            inner: self.state.iterate().clone(),
        }
    }

    #[getter]
    fn t(&self) -> u64 {
        self.state.t()
    }

    #[getter]
    fn update_count(&self) -> u64 {
        self.state.update_count()
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.state.eta()
    }

    fn __repr__(&self) -> String {
        format!(
            "Learner(variant={}, qubits={}, t={})",
            self.state.variant(),
            self.state.qubits(),
            self.state.t()
        )
    }
}

/// Born rule Tr(E rho).
#[pyfunction]
fn born_probability(e: &PyMeasurement, rho: &PyDensityMatrix) -> PyResult<f64> {
    qmodel::born_probability(&e.inner, &rho.inner).map_err(err)
}

/// Postselect rho on acceptance by E; returns (state or None, probability).
#[pyfunction]
fn postselect(e: &PyMeasurement, rho: &PyDensityMatrix) -> PyResult<(Option<PyDensityMatrix>, f64)> {
    match qmodel::postselect(&e.inner, &rho.inner).map_err(err)? {
        qmodel::PostselectOutcome::Accepted { state, probability } => {
            Ok((Some(PyDensityMatrix { inner: state }), probability))
        }
        qmodel::PostselectOutcome::Degenerate => Ok((None, 0.0)),
    }
}

/// Proven regret bound: rftl 2L sqrt(2 ln2 T n), mmw 2L sqrt(ln2 T n).
#[pyfunction]
#[pyo3(signature = (variant, horizon, qubits, lipschitz = 1.0))]
fn theoretical_regret_bound(
    variant: &str,
    horizon: u64,
    qubits: usize,
    lipschitz: f64,
) -> PyResult<f64> {
    Ok(learn::theoretical_regret_bound(
        parse_variant(variant)?,
        horizon,
        qubits,
        lipschitz,
    ))
}

/// Update budget of the mistake-filtered learner.
#[pyfunction]
fn mistake_bound(variant: &str, qubits: usize, epsilon: f64) -> PyResult<f64> {
    Ok(learn::mistake_bound(parse_variant(variant)?, qubits, epsilon))
}

/// Theorem learning rate (clamped below 1/2).
#[pyfunction]
#[pyo3(signature = (variant, horizon, qubits, lipschitz = 1.0))]
fn default_eta(variant: &str, horizon: u64, qubits: usize, lipschitz: f64) -> PyResult<f64> {
    Ok(learn::default_eta(
        parse_variant(variant)?,
        horizon,
        qubits,
        lipschitz,
    ))
}

/// Serial-encoding capacity n / (1 - H2((1 - eps)/2)).
#[pyfunction]
fn serial_encoding_max_bits(qubits: usize, epsilon: f64) -> f64 {
    bounds::serial_encoding_max_bits(qubits, epsilon)
}

/// Random-access-code information bound check.
#[pyfunction]
fn rac_bound_check(qubits: usize, bits: usize, p: f64) -> bool {
    bounds::rac_bound_check(qubits, bits, p)
}

/// Sequentially postselect phi through the measurements and report
/// (success_prob, trace_dist or None, bounds_ok).
#[pyfunction]
fn union_bound_check(
    phi: &PyDensityMatrix,
    measurements: Vec<PyMeasurement>,
) -> PyResult<(f64, Option<f64>, bool)> {
    let inner: Vec<Measurement> = measurements.into_iter().map(|m| m.inner).collect();
    let report = postsel::union_bound_check(&phi.inner, &inner).map_err(err)?;
    Ok((report.success_prob, report.trace_dist, report.bounds_ok))
}

/// Run one experiment from a JSON config (same schema as `qonline --config`);
/// returns the summary as a JSON string and writes CSV/JSON when the config
/// names an output path.
#[pyfunction]
fn run_experiment(config_json: &str) -> PyResult<String> {
    let cfg: ExperimentConfig = serde_json::from_str(config_json).map_err(err)?;
    let output = harness::run_experiment(&cfg).map_err(err)?;
    harness::write_outputs(&cfg, &output).map_err(err)?;
    serde_json::to_string_pretty(&output.summary).map_err(err)
}

#[pymodule]
fn qonline_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyMeasurement>()?;
    m.add_class::<PyLearner>()?;
    m.add_function(wrap_pyfunction!(born_probability, m)?)?;
    m.add_function(wrap_pyfunction!(postselect, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_regret_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mistake_bound, m)?)?;
    m.add_function(wrap_pyfunction!(default_eta, m)?)?;
    m.add_function(wrap_pyfunction!(serial_encoding_max_bits, m)?)?;
    m.add_function(wrap_pyfunction!(rac_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(union_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
