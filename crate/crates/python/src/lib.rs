//! Python bindings for the SQUID cloning simulator.
//!
//! ```python
//! import squid_uqcm as sq
//!
//! q = sq.InputQubit.from_bloch(1.0, 0.3)
//! final, trace = sq.run_uqcm(q)
//! report = sq.clone_fidelities(final, q)
//! print(report.fidelity_squid2)   # 0.8333...
//! ```

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use squid_uqcm::hilbert::{self, Subsystem};
use squid_uqcm::{protocol, validate, verify, Error};

create_exception!(
    squid_uqcm,
    PhysicsError,
    PyException,
    "Leakage or a violated physical precondition."
);

fn to_py(err: Error) -> PyErr {
    if err.is_physics() {
        PhysicsError::new_err(err.to_string())
    } else {
        PyValueError::new_err(err.to_string())
    }
}

/// `(label, elapsed, state)` per trace snapshot.
type TraceRows = Vec<(String, f64, PyPureState)>;
/// `(module, op, max_deviation, tolerance, passed)` per check.
type CheckRows = Vec<(String, String, f64, f64, bool)>;

fn json_text(v: &serde_json::Value) -> String {
    serde_json::to_string(v).expect("json")
}

/// Coupling constants (angular frequencies in simulation units).
#[pyclass(name = "CouplingConfig", from_py_object)]
#[derive(Clone)]
struct PyCouplingConfig {
    inner: squid_uqcm::CouplingConfig,
}

#[pymethods]
impl PyCouplingConfig {
    #[new]
    #[pyo3(signature = (lambda_=1.0, omega_ge=1.0, omega_ie=1.0, lambda_prime=1.0, omega_gi=20.0, delta=100.0))]
    fn new(
        lambda_: f64,
        omega_ge: f64,
        omega_ie: f64,
        lambda_prime: f64,
        omega_gi: f64,
        delta: f64,
    ) -> PyResult<Self> {
        let inner = squid_uqcm::CouplingConfig {
            lambda: lambda_,
            omega_ge,
            omega_ie,
            lambda_prime,
            omega_gi,
            delta,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn omega_ge(&self) -> f64 {
        self.inner.omega_ge
    }

    #[getter]
    fn omega_ie(&self) -> f64 {
        self.inner.omega_ie
    }

    #[getter]
    fn lambda_prime(&self) -> f64 {
        self.inner.lambda_prime
    }

    #[getter]
    fn omega_gi(&self) -> f64 {
        self.inner.omega_gi
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "CouplingConfig(lambda_={}, omega_ge={}, omega_ie={}, lambda_prime={}, omega_gi={}, delta={})",
            c.lambda, c.omega_ge, c.omega_ie, c.lambda_prime, c.omega_gi, c.delta
        )
    }
}

fn couplings(cfg: Option<PyRef<'_, PyCouplingConfig>>) -> squid_uqcm::CouplingConfig {
    cfg.map(|c| c.inner).unwrap_or_default()
}

/// `alpha |+> + beta |->` on SQUID1.
#[pyclass(name = "InputQubit", from_py_object)]
#[derive(Clone)]
struct PyInputQubit {
    inner: protocol::InputQubit,
}

#[pymethods]
impl PyInputQubit {
    #[new]
    fn new(alpha: Complex64, beta: Complex64) -> PyResult<Self> {
        Ok(Self {
            inner: protocol::InputQubit::new(alpha, beta).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_bloch(theta: f64, phi: f64) -> Self {
        Self {
            inner: protocol::InputQubit::from_bloch(theta, phi),
        }
    }

    #[getter]
    fn alpha(&self) -> Complex64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> Complex64 {
        self.inner.beta()
    }

    fn __repr__(&self) -> String {
        format!(
            "InputQubit(alpha={}, beta={})",
            self.inner.alpha(),
            self.inner.beta()
        )
    }
}

/// Normalized state of three SQUIDs and the cavity.
#[pyclass(name = "PureState", from_py_object)]
#[derive(Clone)]
struct PyPureState {
    inner: hilbert::PureState,
}

#[pymethods]
impl PyPureState {
    #[getter]
    fn dimension(&self) -> usize {
        self.inner.spec().dimension()
    }

    #[getter]
    fn fock_cutoff(&self) -> usize {
        self.inner.spec().fock_cutoff()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn leakage(&self) -> f64 {
        self.inner.leakage()
    }

    /// Flat index of `(levels, photons)`; levels as 0=g, 1=i, 2=e.
    fn basis_index(&self, levels: Vec<usize>, photons: usize) -> PyResult<usize> {
        self.inner
            .spec()
            .basis_index_raw(&levels, photons)
            .map_err(to_py)
    }

    /// Reduced density matrix over `keep` ("squid1".."squid3", "cavity").
    fn partial_trace(&self, keep: Vec<String>) -> PyResult<Vec<Vec<Complex64>>> {
        let keep = keep
            .iter()
            .map(|s| parse_subsystem(s))
            .collect::<PyResult<Vec<_>>>()?;
        let rho = hilbert::partial_trace(&self.inner, &keep).map_err(to_py)?;
        let m = rho.entries();
        Ok((0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
            .collect())
    }

    fn fidelity(&self, other: PyRef<'_, PyPureState>) -> PyResult<f64> {
        hilbert::fidelity_pure(&self.inner, &other.inner).map_err(to_py)
    }

    /// `{"basis": ..., "amplitudes": [[re, im], ...]}`
    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.to_dump()).expect("json")
    }
}

fn parse_subsystem(s: &str) -> PyResult<Subsystem> {
    let lower = s.to_ascii_lowercase();
    if lower == "cavity" {
        return Ok(Subsystem::Cavity);
    }
    lower
        .strip_prefix("squid")
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .map(|k| Subsystem::Squid(k - 1))
        .ok_or_else(|| PyValueError::new_err(format!("unknown subsystem {s:?}")))
}

#[pyclass(name = "CloneReport", skip_from_py_object)]
struct PyCloneReport {
    inner: verify::CloneReport,
}

#[pymethods]
impl PyCloneReport {
    #[getter]
    fn fidelity_squid2(&self) -> f64 {
        self.inner.fidelity_squid2
    }

    #[getter]
    fn fidelity_squid3(&self) -> f64 {
        self.inner.fidelity_squid3
    }

    #[getter]
    fn target_overlap(&self) -> f64 {
        self.inner.target_overlap
    }

    #[getter]
    fn ancilla_orthogonality(&self) -> f64 {
        self.inner.ancilla_orthogonality
    }

    #[getter]
    fn leakage(&self) -> f64 {
        self.inner.leakage
    }

    #[getter]
    fn leakage_flagged(&self) -> bool {
        self.inner.leakage_flagged
    }

    fn to_json(&self) -> String {
        json_text(&self.inner.to_json())
    }

    fn __repr__(&self) -> String {
        format!(
            "CloneReport(f2={:.12}, f3={:.12}, overlap={:.12}, leakage={:.3e})",
            self.inner.fidelity_squid2,
            self.inner.fidelity_squid3,
            self.inner.target_overlap,
            self.inner.leakage
        )
    }
}

/// Runs the cloning protocol. Returns `(final_state, trace)` where `trace`
/// is a list of `(label, elapsed, PureState)`.
#[pyfunction]
#[pyo3(signature = (q, cfg=None, fock_cutoff=2, timing_jitter=0.0, jitter_seed=0))]
fn run_uqcm(
    q: PyRef<'_, PyInputQubit>,
    cfg: Option<PyRef<'_, PyCouplingConfig>>,
    fock_cutoff: usize,
    timing_jitter: f64,
    jitter_seed: u64,
) -> PyResult<(PyPureState, TraceRows)> {
    let opts = protocol::RunOptions {
        fock_cutoff,
        timing_jitter,
        jitter_seed,
        ..protocol::RunOptions::default()
    };
    let (state, trace) =
        protocol::run_uqcm_with(&q.inner, &couplings(cfg), &opts).map_err(to_py)?;
    let entries = trace
        .entries
        .into_iter()
        .map(|e| (e.label, e.elapsed, PyPureState { inner: e.state }))
        .collect();
    Ok((PyPureState { inner: state }, entries))
}

#[pyfunction]
fn clone_fidelities(
    state: PyRef<'_, PyPureState>,
    q: PyRef<'_, PyInputQubit>,
) -> PyResult<PyCloneReport> {
    Ok(PyCloneReport {
        inner: verify::clone_fidelities(&state.inner, &q.inner).map_err(to_py)?,
    })
}

/// Ideal cloner output for `q` (three SQUIDs, cutoff `fock_cutoff`).
#[pyfunction]
#[pyo3(signature = (q, fock_cutoff=2))]
fn target_state(q: PyRef<'_, PyInputQubit>, fock_cutoff: usize) -> PyResult<PyPureState> {
    let spec = hilbert::BasisSpec::new(3, fock_cutoff).map_err(to_py)?;
    Ok(PyPureState {
        inner: verify::target_state(&q.inner, &spec).map_err(to_py)?,
    })
}

/// Seeded Bloch-sphere sweep. Returns `(csv_text, summary_json_text)`.
#[pyfunction]
#[pyo3(signature = (n, seed, cfg=None, jobs=0, timing_jitter=0.0))]
fn universality_sweep(
    py: Python<'_>,
    n: usize,
    seed: u64,
    cfg: Option<PyRef<'_, PyCouplingConfig>>,
    jobs: usize,
    timing_jitter: f64,
) -> PyResult<(String, String)> {
    let cfg = couplings(cfg);
    let opts = verify::SweepOptions {
        jobs,
        timing_jitter,
        ..verify::SweepOptions::default()
    };
    let report = py
        .detach(|| verify::universality_sweep(n, seed, &cfg, &opts))
        .map_err(to_py)?;
    Ok((report.to_csv(), json_text(&report.summary_json())))
}

/// The pulse schedule as JSON text.
#[pyfunction]
#[pyo3(signature = (cfg=None))]
fn schedule_json(cfg: Option<PyRef<'_, PyCouplingConfig>>) -> PyResult<String> {
    let schedule = protocol::build_uqcm_schedule(&couplings(cfg)).map_err(to_py)?;
    Ok(json_text(&schedule.to_json()))
}

#[pyfunction]
#[pyo3(signature = (cfg=None))]
fn total_duration(cfg: Option<PyRef<'_, PyCouplingConfig>>) -> PyResult<f64> {
    Ok(protocol::build_uqcm_schedule(&couplings(cfg))
        .map_err(to_py)?
        .total_duration())
}

/// Runs the self-check suite; returns `(module, op, max_deviation, tolerance, passed)` tuples.
#[pyfunction]
#[pyo3(signature = (cfg=None))]
fn run_validation(py: Python<'_>, cfg: Option<PyRef<'_, PyCouplingConfig>>) -> PyResult<CheckRows> {
    let cfg = couplings(cfg);
    let checks = py
        .detach(|| validate::run_validation(&cfg))
        .map_err(to_py)?;
    Ok(checks
        .into_iter()
        .map(|c| {
            (
                c.module.to_string(),
                c.op,
                c.max_deviation,
                c.tolerance,
                c.passed,
            )
        })
        .collect())
}

#[pymodule]
#[pyo3(name = "squid_uqcm")]
fn squid_uqcm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCouplingConfig>()?;
    m.add_class::<PyInputQubit>()?;
    m.add_class::<PyPureState>()?;
    m.add_class::<PyCloneReport>()?;
    m.add("PhysicsError", m.py().get_type::<PhysicsError>())?;

    m.add_function(wrap_pyfunction!(run_uqcm, m)?)?;
    m.add_function(wrap_pyfunction!(clone_fidelities, m)?)?;
    m.add_function(wrap_pyfunction!(target_state, m)?)?;
    m.add_function(wrap_pyfunction!(universality_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_json, m)?)?;
    m.add_function(wrap_pyfunction!(total_duration, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    Ok(())
}
