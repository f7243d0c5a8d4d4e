//! Python bindings: instances, QUBO construction, conflict circuits, and the
//! three optimization strategies, mirroring the `qtis` crate's public API.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qtis::circuits::{
    build_ansatz, pair_overlap_probability, standalone_conflict_circuit, AnsatzConfig,
    ConflictVariant, ZetaMode,
};
use qtis::harness::{decode_solution, modal_assignment_bits, verify_tables, DEFAULT_BASE_SEED};
use qtis::model::{builtin_test_set, load_instance, SchedulingInstance, TaskInterval};
use qtis::optimize::{
    objective as objective_fn, strategy_htqaoa, strategy_standard, strategy_tqaoa, Estimator,
    OptimizerOptions, ParameterVector, ScoreMode,
};
use qtis::qubo::{brute_force_minimum, energy_bounds, instance_qubo, qubo_to_ising};
use qtis::sim::{bitstring, run_circuit, StateVector};

fn err(e: qtis::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_variant(s: &str) -> PyResult<ConflictVariant> {
    s.parse().map_err(err)
}

fn parse_zeta_mode(s: &str) -> PyResult<ZetaMode> {
    s.parse().map_err(err)
}

fn parse_estimator(s: &str, shots: u64) -> PyResult<Estimator> {
    match s {
        "exact" => Ok(Estimator::Exact),
        "sampled" => Ok(Estimator::Sampled { shots }),
        other => Err(PyValueError::new_err(format!(
            "unknown estimator '{other}' (exact|sampled)"
        ))),
    }
}

/// A fixed-interval scheduling instance.
#[pyclass(frozen)]
struct Instance {
    inner: SchedulingInstance,
}

#[pymethods]
impl Instance {
    #[new]
    #[pyo3(signature = (tasks, resources, penalty=None))]
    fn new(tasks: Vec<(f64, f64)>, resources: usize, penalty: Option<f64>) -> PyResult<Self> {
        let tasks = tasks
            .into_iter()
            .map(|(s, e)| TaskInterval::new(s, e))
            .collect::<qtis::Result<Vec<_>>>()
            .map_err(err)?;
        let inner = match penalty {
            Some(p) => SchedulingInstance::with_penalty(tasks, resources, p),
            None => SchedulingInstance::new(tasks, resources),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    /// One of the six built-in benchmark sets.
    #[staticmethod]
    fn builtin(id: usize) -> PyResult<Self> {
        Ok(Self {
            inner: builtin_test_set(id).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(document: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_instance(document).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_document()
    }

    #[getter]
    fn n_tasks(&self) -> usize {
        self.inner.n_tasks()
    }

    #[getter]
    fn resources(&self) -> usize {
        self.inner.resources()
    }

    #[getter]
    fn penalty(&self) -> f64 {
        self.inner.penalty()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    fn tasks(&self) -> Vec<(f64, f64)> {
        self.inner.tasks().iter().map(|t| (t.start, t.end)).collect()
    }

    /// Ground-truth pairwise conflicts `(i, k, c_ik)` in lexicographic order.
    fn overlaps(&self) -> Vec<(usize, usize, bool)> {
        qtis::model::overlap_matrix(&self.inner).pairs().collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n_tasks={}, resources={}, penalty={})",
            self.inner.n_tasks(),
            self.inner.resources(),
            self.inner.penalty()
        )
    }
}

/// The scheduling QUBO of an instance.
#[pyclass(frozen)]
struct Qubo {
    inner: qtis::qubo::QuboModel,
}

#[pymethods]
impl Qubo {
    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    #[getter]
    fn constant(&self) -> f64 {
        self.inner.constant()
    }

    fn linear(&self) -> Vec<f64> {
        self.inner.linear().to_vec()
    }

    fn quadratic(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .quadratic()
            .iter()
            .map(|(&(a, b), &v)| (a, b, v))
            .collect()
    }

    fn evaluate(&self, bits: Vec<u8>) -> PyResult<f64> {
        self.inner.evaluate(&bits).map_err(err)
    }

    /// Exhaustive minimum: `(bits, energy)`.
    fn brute_force(&self) -> PyResult<(Vec<u32>, f64)> {
        let (bits, energy) = brute_force_minimum(&self.inner).map_err(err)?;
        Ok((bits.into_iter().map(u32::from).collect(), energy))
    }

    /// Ising image constants: `(linear, quadratic, constant)`.
    fn to_ising(&self) -> (Vec<f64>, Vec<(usize, usize, f64)>, f64) {
        let ising = qubo_to_ising(&self.inner);
        (
            ising.linear().to_vec(),
            ising
                .quadratic()
                .iter()
                .map(|(&(a, b), &v)| (a, b, v))
                .collect(),
            ising.constant(),
        )
    }

    fn dump(&self) -> String {
        self.inner.dump_coefficients()
    }

    fn __repr__(&self) -> String {
        format!(
            "Qubo(n_vars={}, constant={})",
            self.inner.n_vars(),
            self.inner.constant()
        )
    }
}

/// One finished optimization run plus its decoded schedule.
#[pyclass(frozen)]
struct SolveResult {
    #[pyo3(get)]
    e_norm: f64,
    #[pyo3(get)]
    raw_energy: f64,
    #[pyo3(get)]
    evaluations: usize,
    #[pyo3(get)]
    wall_s: f64,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    depth_trace: Vec<f64>,
    #[pyo3(get)]
    modal_bitstring: String,
    #[pyo3(get)]
    gamma: Vec<f64>,
    #[pyo3(get)]
    zeta: Option<Vec<f64>>,
    #[pyo3(get)]
    beta: Vec<f64>,
    #[pyo3(get)]
    assignment: Vec<Option<usize>>,
    #[pyo3(get)]
    conflicts: Vec<(usize, usize, usize)>,
    #[pyo3(get)]
    valid: bool,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(e_norm={:.6}, evaluations={}, valid={})",
            self.e_norm, self.evaluations, self.valid
        )
    }
}

/// The scheduling QUBO of `instance`.
#[pyfunction]
fn build_qubo(instance: &Instance) -> Qubo {
    Qubo {
        inner: instance_qubo(&instance.inner),
    }
}

/// Normalization bounds `(e_min_ideal, e_max)`.
#[pyfunction]
fn bounds(instance: &Instance) -> (f64, f64) {
    let overlaps = qtis::model::overlap_matrix(&instance.inner);
    energy_bounds(&instance.inner, &overlaps)
}

/// Analytic ancilla probability of the isolated pair comparison.
#[pyfunction]
fn pair_probability(instance: &Instance, i: usize, k: usize) -> PyResult<f64> {
    pair_overlap_probability(&instance.inner, i, k).map_err(err)
}

/// `P(ancilla = 1)` per pair after the conflict front end, in pair order.
#[pyfunction]
#[pyo3(signature = (instance, variant="classical"))]
fn conflict_probabilities(instance: &Instance, variant: &str) -> PyResult<Vec<f64>> {
    let (circuit, layout) =
        standalone_conflict_circuit(&instance.inner, parse_variant(variant)?).map_err(err)?;
    let state = run_circuit(&circuit, &StateVector::zero_state(circuit.n_qubits())).map_err(err)?;
    layout
        .ancilla_qubits()
        .map(|q| state.probability_of_one(q).map_err(err))
        .collect()
}

/// Text dump of the full ansatz circuit with every layer at the given angles.
#[pyfunction]
#[pyo3(signature = (instance, depth=1, zeta_mode="independent", variant="classical", gamma=0.5, zeta=0.5, beta=0.5))]
fn dump_circuit(
    instance: &Instance,
    depth: usize,
    zeta_mode: &str,
    variant: &str,
    gamma: f64,
    zeta: f64,
    beta: f64,
) -> PyResult<String> {
    let zeta_mode = parse_zeta_mode(zeta_mode)?;
    let params = ParameterVector::new(
        vec![gamma; depth],
        matches!(zeta_mode, ZetaMode::Independent).then(|| vec![zeta; depth]),
        vec![beta; depth],
    )
    .map_err(err)?;
    let config = AnsatzConfig::new(depth, zeta_mode, parse_variant(variant)?);
    let built = build_ansatz(&instance.inner, &config, &params).map_err(err)?;
    Ok(built.circuit.dump())
}

/// Normalized energy of the ansatz state at explicit angles.
#[pyfunction]
#[pyo3(signature = (instance, gamma, beta, zeta=None, variant="classical", estimator="exact", shots=100_000))]
fn objective(
    instance: &Instance,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    zeta: Option<Vec<f64>>,
    variant: &str,
    estimator: &str,
    shots: u64,
) -> PyResult<f64> {
    let params = ParameterVector::new(gamma, zeta, beta).map_err(err)?;
    let config = AnsatzConfig::new(params.depth(), params.zeta_mode(), parse_variant(variant)?);
    objective_fn(
        &params,
        &instance.inner,
        &config,
        parse_estimator(estimator, shots)?,
    )
    .map_err(err)
}

/// Runs one optimization strategy and decodes its modal schedule.
#[pyfunction]
#[pyo3(signature = (instance, strategy="standard", depth=10, zeta_mode="independent",
                    variant="classical", seed=DEFAULT_BASE_SEED, estimator="exact",
                    shots=100_000, score_from_ancilla=false, prune=false,
                    max_evaluations=2000))]
#[allow(clippy::too_many_arguments)]
fn solve(
    instance: &Instance,
    strategy: &str,
    depth: usize,
    zeta_mode: &str,
    variant: &str,
    seed: u64,
    estimator: &str,
    shots: u64,
    score_from_ancilla: bool,
    prune: bool,
    max_evaluations: usize,
) -> PyResult<SolveResult> {
    let config = AnsatzConfig {
        depth,
        zeta_mode: parse_zeta_mode(zeta_mode)?,
        variant: parse_variant(variant)?,
        prune,
    };
    let options = OptimizerOptions {
        rng_seed: seed,
        estimator: parse_estimator(estimator, shots)?,
        score_mode: if score_from_ancilla {
            ScoreMode::FromAncilla
        } else {
            ScoreMode::GroundTruth
        },
        max_evaluations,
        ..Default::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let run = match strategy {
        "standard" => strategy_standard(&instance.inner, &config, &options, &mut rng),
        "tqaoa" => strategy_tqaoa(&instance.inner, &config, &options, &mut rng),
        "htqaoa" => strategy_htqaoa(&instance.inner, &config, &options, &mut rng),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown strategy '{other}' (standard|tqaoa|htqaoa)"
            )))
        }
    }
    .map_err(err)?;
    let schedule =
        decode_solution(&modal_assignment_bits(&run, &instance.inner), &instance.inner)
            .map_err(err)?;
    Ok(SolveResult {
        e_norm: run.e_norm,
        raw_energy: run.raw_energy,
        evaluations: run.evaluations,
        wall_s: run.wall_time,
        seed: run.seed,
        converged: run.converged,
        depth_trace: run.depth_trace.clone(),
        modal_bitstring: bitstring(run.modal_outcome(), run.distribution.n_bits()),
        gamma: run.best_params.gamma().to_vec(),
        zeta: run.best_params.zeta().map(<[f64]>::to_vec),
        beta: run.best_params.beta().to_vec(),
        valid: schedule.is_valid(),
        assignment: schedule.assignment,
        conflicts: schedule.conflicts,
    })
}

/// Reference checks of the built-in sets: `(name, passed, detail)` triples.
#[pyfunction]
fn verify() -> Vec<(String, bool, String)> {
    verify_tables()
        .checks
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pymodule]
fn qtis_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Qubo>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(build_qubo, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(pair_probability, m)?)?;
    m.add_function(wrap_pyfunction!(conflict_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(dump_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("DEFAULT_BASE_SEED", DEFAULT_BASE_SEED)?;
    Ok(())
}
