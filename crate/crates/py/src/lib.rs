//! Python bindings. Wave functions cross the boundary as lists of Python complex numbers.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tdnlse_core::harness::{self, output};
use tdnlse_core::observables::{self as obs};
use tdnlse_core::operator::solve_eigenbasis;
use tdnlse_core::propagator::{self, Workspace};
use tdnlse_core::{build_grid, ComplexField, DampingConfig, Error, FieldConfig, StepperConfig, UnitsConfig};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::FixedPointDiverged { .. } | Error::EigenNoConvergence { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(frozen, skip_from_py_object, name = "Grid")]
#[derive(Clone, Copy)]
struct PyGrid(tdnlse_core::Grid1D);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(x_min: f64, x_max: f64, n_interior: usize) -> PyResult<Self> {
        build_grid(x_min, x_max, n_interior).map(Self).map_err(err)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn points(&self) -> Vec<f64> {
        self.0.points().collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}, {}, {})", self.0.x_min(), self.0.x_max(), self.0.len())
    }
}

/// Grid plus static well; `potential` is `"square_well"` or `"harmonic"`.
#[pyclass(frozen, name = "System")]
struct PySystem {
    inner: propagator::System,
}

impl PySystem {
    fn field(&self, psi: Vec<Complex64>) -> PyResult<ComplexField> {
        ComplexField::new(*self.inner.grid(), psi).map_err(err)
    }
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (grid, potential = "square_well", omega0 = 1.0))]
    fn new(grid: &PyGrid, potential: &str, omega0: f64) -> PyResult<Self> {
        let fields = match potential {
            "square_well" => FieldConfig::square_well(),
            "harmonic" => FieldConfig::harmonic(omega0),
            other => return Err(PyValueError::new_err(format!("unknown potential {other:?}"))),
        };
        propagator::System::new(grid.0, UnitsConfig::default(), fields)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    /// Lowest `k` energies and real eigenstates.
    fn eigenbasis(&self, k: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let b = solve_eigenbasis(&self.inner.static_hamiltonian(), k).map_err(err)?;
        Ok((b.energies().to_vec(), b.states().iter().map(|s| s.values().to_vec()).collect()))
    }

    fn apply_hamiltonian(&self, psi: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let psi = self.field(psi)?;
        let h = self.inner.static_hamiltonian();
        h.apply(&psi).map(|f| f.into_values()).map_err(err)
    }

    /// Norm, energy, velocity, radiation power (commutator and integral forms) and forces.
    #[pyo3(signature = (psi, beta = 0.0))]
    fn observables(&self, py: Python<'_>, psi: Vec<Complex64>, beta: f64) -> PyResult<Py<PyAny>> {
        let psi = self.field(psi)?;
        let h = self.inner.static_hamiltonian();
        let damping = DampingConfig::new(beta).map_err(err)?;
        let units = self.inner.units();
        let f = obs::forces(&psi, &h, &damping).map_err(err)?;
        let rate = tdnlse_core::operator::drho_dt(&psi, &h).map_err(err)?;
        let d = pyo3::types::PyDict::new(py);
        d.set_item("norm", psi.norm_sqr())?;
        d.set_item("energy", obs::average_energy(&psi, &h).map_err(err)?)?;
        d.set_item("velocity", obs::average_velocity(&psi, units))?;
        d.set_item("power", obs::radiation_power(&psi, &h, &damping).map_err(err)?)?;
        d.set_item("power_formula", beta * rate.values().iter().map(|r| r * r).sum::<f64>() * psi.grid().dx())?;
        d.set_item("lorentz_force", f.lorentz)?;
        d.set_item("recoil_force", f.recoil)?;
        Ok(d.into_any().unbind())
    }

    /// Advances `psi` from `t` by `n_steps` trapezoidal steps of size `dt`.
    #[pyo3(signature = (psi, n_steps, dt = 1e-3, beta = 0.0, t = 0.0))]
    fn evolve(&self, py: Python<'_>, psi: Vec<Complex64>, n_steps: usize, dt: f64, beta: f64, t: f64) -> PyResult<Vec<Complex64>> {
        let psi = self.field(psi)?;
        let damping = DampingConfig::new(beta).map_err(err)?;
        let stepper = StepperConfig::with_dt(dt);
        stepper.validate().map_err(err)?;
        let sys = &self.inner;
        py.detach(|| {
            let mut ws = Workspace::new(sys.grid().len());
            let mut state = propagator::WaveState::new(psi, t);
            for _ in 0..n_steps {
                state = propagator::step_with(&state, sys, &damping, &stepper, dt, &mut ws)?.0;
            }
            Ok(state.psi.into_values())
        })
        .map_err(err)
    }
}

#[pyclass(frozen, name = "RunResult")]
struct PyRunResult(harness::RunResult);

#[pymethods]
impl PyRunResult {
    #[getter]
    fn final_eigenstate(&self) -> Option<usize> {
        self.0.final_eigenstate
    }
    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }
    #[getter]
    fn consistent(&self) -> bool {
        self.0.consistent
    }
    #[getter]
    fn radiated_total(&self) -> f64 {
        self.0.radiated_total
    }
    #[getter]
    fn work_total(&self) -> f64 {
        self.0.work_total
    }
    #[getter]
    fn balance_residual(&self) -> f64 {
        self.0.balance_residual
    }
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.0.energies.clone()
    }
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.t).collect()
    }
    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.energy).collect()
    }
    #[getter]
    fn power(&self) -> Vec<f64> {
        self.0.records.iter().map(|r| r.power).collect()
    }
    #[getter]
    fn populations(&self) -> Vec<Vec<f64>> {
        self.0.records.iter().map(|r| r.populations.clone()).collect()
    }
    #[getter]
    fn final_state(&self) -> Vec<Complex64> {
        self.0.final_state.psi.values().to_vec()
    }
    fn csv(&self) -> String {
        output::render_csv(&self.0)
    }
    fn summary_json(&self) -> String {
        output::render_summary(&self.0)
    }
    fn write(&self, dir: std::path::PathBuf) -> PyResult<(std::path::PathBuf, std::path::PathBuf)> {
        output::emit_results(&self.0, &dir).map_err(err)
    }
}

/// Runs a scenario given as a JSON string in the config-file schema.
#[pyfunction]
fn run_scenario(py: Python<'_>, config_json: &str) -> PyResult<PyRunResult> {
    let cfg = harness::ScenarioConfig::from_json(config_json).map_err(err)?;
    py.detach(|| harness::run_scenario(&cfg)).map(PyRunResult).map_err(err)
}

/// Runs the calibration sweep and returns the report as a JSON string.
#[pyfunction]
fn calibrate_beta(py: Python<'_>, config_json: &str, betas: Vec<f64>) -> PyResult<String> {
    let cfg = harness::ScenarioConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| harness::calibrate_beta(&cfg, &betas)).map_err(err)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

#[pymodule]
fn tdnlse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", tdnlse_core::VERSION)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_beta, m)?)?;
    Ok(())
}
