use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;

use oocsim_core::circuit as circ;
use oocsim_core::costmodel as cost;
use oocsim_core::engine::{run_plan, violation_error};
use oocsim_core::oracle;
use oocsim_core::plan::{self, schedule, reference};
use oocsim_core::storage::SliceStore;

create_exception!(oocsim, OocsimError, PyException);

fn err(e: oocsim_core::Error) -> PyErr {
    match e {
        oocsim_core::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => OocsimError::new_err(other.to_string()),
    }
}

#[pyclass(name = "QubitLayout", module = "oocsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct QubitLayout(circ::QubitLayout);

#[pymethods]
impl QubitLayout {
    /// Staggered `rows x cols` lattice with the four coupling patterns.
    #[staticmethod]
    fn sycamore_like(rows: usize, cols: usize) -> PyResult<Self> {
        circ::QubitLayout::sycamore_like(rows, cols).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        circ::QubitLayout::load(path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        circ::QubitLayout::from_toml_str(text).map(Self).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.0.to_toml_string().map_err(err)
    }

    /// First `n` qubits only.
    fn truncated(&self, n: usize) -> PyResult<Self> {
        self.0.truncated(n).map(Self).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    fn couplings(&self) -> Vec<(usize, usize)> {
        self.0.couplings().iter().map(|c| (c.a, c.b)).collect()
    }

    fn __repr__(&self) -> String {
        format!("QubitLayout(n_qubits={}, couplings={})", self.0.n_qubits(), self.0.couplings().len())
    }
}

#[pyclass(name = "Circuit", module = "oocsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Circuit(circ::Circuit);

#[pymethods]
impl Circuit {
    /// Random ABCDCDAB circuit with `cycles` cycles.
    #[staticmethod]
    #[pyo3(signature = (layout, cycles, seed=0))]
    fn generate(layout: &QubitLayout, cycles: usize, seed: u64) -> PyResult<Self> {
        circ::generate_sycamore(&layout.0, cycles, seed).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        circ::Circuit::load(path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        circ::Circuit::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    /// Same circuit with single-qubit gates absorbed into two-qubit gates.
    fn merged(&self) -> PyResult<Self> {
        circ::merge_single_qubit_gates(&self.0).map(Self).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits
    }

    #[getter]
    fn layer_count(&self) -> usize {
        self.0.layers.len()
    }

    #[getter]
    fn gate_count(&self) -> usize {
        self.0.gate_count()
    }

    fn is_two_qubit_only(&self) -> bool {
        self.0.is_two_qubit_only()
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(n_qubits={}, layers={}, gates={})",
            self.0.n_qubits,
            self.0.layers.len(),
            self.0.gate_count()
        )
    }
}

impl Circuit {
    fn two_qubit(&self) -> PyResult<circ::Circuit> {
        if self.0.is_two_qubit_only() {
            Ok(self.0.clone())
        } else {
            circ::merge_single_qubit_gates(&self.0).map_err(err)
        }
    }
}

#[pyclass(name = "SimulationPlan", module = "oocsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct SimulationPlan(plan::SimulationPlan);

#[pymethods]
impl SimulationPlan {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        plan::parse_plan(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        plan::SimulationPlan::load(&path).map(Self).map_err(err)
    }

    /// Greedy plan with alternating disk sets.
    #[staticmethod]
    #[pyo3(signature = (circuit, disk_bits=1, global_bits=2, deferred=2, k_max=plan::K_MAX))]
    fn build(circuit: &Circuit, disk_bits: usize, global_bits: usize, deferred: usize, k_max: usize) -> PyResult<Self> {
        let c = circuit.two_qubit()?;
        let mut spec = schedule::ScheduleSpec::alternating(c.n_qubits, disk_bits, global_bits).map_err(err)?;
        spec.max_deferred = deferred;
        spec.k_max = k_max;
        schedule::build_plan(&c, &spec).map(Self).map_err(err)
    }

    /// One of `sycamore53-20`, `sycamore53-10`, `sycamore54-20`.
    #[staticmethod]
    fn reference(name: &str) -> PyResult<Self> {
        match name {
            "sycamore53-20" => Ok(Self(reference::sycamore53_20())),
            "sycamore53-10" => Ok(Self(reference::sycamore53_10())),
            "sycamore54-20" => Ok(Self(reference::sycamore54_20())),
            other => Err(OocsimError::new_err(format!("unknown reference plan `{other}`"))),
        }
    }

    fn emit(&self) -> String {
        plan::emit_plan(&self.0)
    }

    /// Violation messages; empty when the plan is valid.
    #[pyo3(signature = (circuit=None))]
    fn validate(&self, circuit: Option<&Circuit>) -> PyResult<Vec<String>> {
        let c = circuit.map(Circuit::two_qubit).transpose()?;
        Ok(plan::validate_plan(&self.0, c.as_ref())
            .iter()
            .map(ToString::to_string)
            .collect())
    }

    fn summarize(&self) -> PyResult<PlanSummary> {
        plan::summarize_plan(&self.0).map(PlanSummary).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn step_count(&self) -> usize {
        self.0.steps().len()
    }

    fn __repr__(&self) -> String {
        format!("SimulationPlan(n_qubits={}, steps={})", self.0.n_qubits(), self.0.steps().len())
    }
}

#[pyclass(name = "PlanSummary", module = "oocsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PlanSummary(plan::PlanSummary);

#[pymethods]
impl PlanSummary {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        plan::PlanSummary::load(&path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        plan::PlanSummary::from_toml_str(text).map(Self).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.0.to_toml_string().map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits
    }

    #[getter]
    fn disk_slices(&self) -> u64 {
        self.0.disk_slices
    }

    #[getter]
    fn transfers(&self) -> u32 {
        self.0.transfers()
    }

    #[getter]
    fn all2alls(&self) -> f64 {
        self.0.all2alls()
    }

    #[getter]
    fn kernels(&self) -> u32 {
        self.0.kernels()
    }

    #[getter]
    fn contraction_flops(&self) -> f64 {
        self.0.contraction_flops()
    }

    fn phase_names(&self) -> Vec<String> {
        self.0.phases.iter().map(|p| p.name.clone()).collect()
    }
}

#[pyclass(name = "MachineProfile", module = "oocsim", frozen, skip_from_py_object)]
#[derive(Clone)]
struct MachineProfile(cost::MachineProfile);

#[pymethods]
impl MachineProfile {
    #[staticmethod]
    fn summit() -> Self {
        Self(cost::MachineProfile::summit())
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        cost::MachineProfile::load(&path).map(Self).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.0.to_toml_string().map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn sockets(&self) -> u64 {
        self.0.sockets
    }

    #[getter]
    fn t_gate_45q(&self) -> f64 {
        self.0.t_gate_45q
    }

    #[getter]
    fn t_gate_30q(&self) -> f64 {
        self.0.t_gate_30q
    }

    #[getter]
    fn contraction_rate(&self) -> f64 {
        self.0.contraction_rate
    }
}

#[pyclass(name = "CostReport", module = "oocsim", frozen)]
struct CostReport(cost::CostReport);

#[pymethods]
impl CostReport {
    #[getter]
    fn total_days(&self) -> f64 {
        self.0.total.days()
    }

    #[getter]
    fn compute_days(&self) -> f64 {
        self.0.compute.days()
    }

    #[getter]
    fn all2all_days(&self) -> f64 {
        self.0.all2all.days()
    }

    #[getter]
    fn disk_days(&self) -> f64 {
        self.0.disk.days()
    }

    /// `(label, days, percent)` per phase row.
    fn rows(&self) -> Vec<(String, f64, f64)> {
        self.0
            .phases
            .iter()
            .map(|r| (r.label.clone(), r.days(), r.percent))
            .collect()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.0.to_csv().map_err(err)
    }
}

fn profile_or_summit(profile: Option<&MachineProfile>) -> cost::MachineProfile {
    profile.map_or_else(cost::MachineProfile::summit, |p| p.0.clone())
}

#[pyfunction]
#[pyo3(signature = (summary, profile=None))]
fn estimate(summary: &PlanSummary, profile: Option<&MachineProfile>) -> PyResult<CostReport> {
    cost::estimate(&summary.0, &profile_or_summit(profile))
        .map(CostReport)
        .map_err(err)
}

/// `(cycles, days)` for every row of a sweep file.
#[pyfunction]
#[pyo3(signature = (path, profile=None))]
fn depth_sweep(path: PathBuf, profile: Option<&MachineProfile>) -> PyResult<Vec<(u32, f64)>> {
    let spec = cost::SweepSpec::load(&path).map_err(err)?;
    let points = cost::depth_sweep(&spec, &profile_or_summit(profile)).map_err(err)?;
    Ok(points.iter().map(|p| (p.cycles, p.days)).collect())
}

#[pyfunction]
fn contraction_flops(n_qubits: usize, entanglement_bits: usize) -> f64 {
    cost::contraction_flops(n_qubits, entanglement_bits)
}

#[pyfunction]
#[pyo3(signature = (n_qubits, profile=None))]
fn disk_footprint(n_qubits: usize, profile: Option<&MachineProfile>) -> u128 {
    cost::disk_footprint(n_qubits, &profile_or_summit(profile))
}

/// Dense state vector of the circuit; qubit 0 is the least significant bit.
#[pyfunction]
fn dense_simulate(py: Python<'_>, circuit: &Circuit) -> PyResult<Vec<Complex64>> {
    let c = circuit.0.clone();
    py.detach(move || oracle::dense_simulate(&c))
        .map(oracle::DenseState::into_amplitudes)
        .map_err(err)
}

/// Runs a plan and returns `(amplitudes, trace_json)`. With `storage_root`
/// the amplitudes also stay on disk in single precision.
#[pyfunction]
#[pyo3(signature = (circuit, plan, storage_root=None))]
fn simulate(
    py: Python<'_>,
    circuit: &Circuit,
    plan: &SimulationPlan,
    storage_root: Option<PathBuf>,
) -> PyResult<(Vec<Complex64>, String)> {
    let c = circuit.two_qubit()?;
    let p = plan.0.clone();
    py.detach(move || {
        let violations = plan::validate_plan(&p, Some(&c));
        if !violations.is_empty() {
            return Err(violation_error(&violations));
        }
        let mut store = match storage_root {
            Some(root) => SliceStore::disk_fresh(root)?,
            None => SliceStore::memory(),
        };
        let trace = run_plan(&p, &c, &mut store)?;
        Ok((store.load_state()?, trace.to_json()?))
    })
    .map_err(err)
}

/// `(max_abs_diff, fidelity)` between two state vectors.
#[pyfunction]
fn compare_states(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<(f64, f64)> {
    oracle::compare_states(&a, &b)
        .map(|c| (c.max_abs_diff, c.fidelity))
        .map_err(err)
}

#[pymodule]
fn oocsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OocsimError", m.py().get_type::<OocsimError>())?;
    m.add("ORACLE_MAX_QUBITS", oracle::ORACLE_MAX_QUBITS)?;
    m.add_class::<QubitLayout>()?;
    m.add_class::<Circuit>()?;
    m.add_class::<SimulationPlan>()?;
    m.add_class::<PlanSummary>()?;
    m.add_class::<MachineProfile>()?;
    m.add_class::<CostReport>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(depth_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_flops, m)?)?;
    m.add_function(wrap_pyfunction!(disk_footprint, m)?)?;
    m.add_function(wrap_pyfunction!(dense_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare_states, m)?)?;
    Ok(())
}
