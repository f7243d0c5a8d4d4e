//! Circuit synthesis: the two conflict-detection front ends, the per-layer
//! gate realizations of `H_p`, `H_c`, `H_B`, and the assembled ansatz.
//!
//! Register layout is fixed: problem qubits `0..I·J` (task-major), conflict
//! ancillas next in lexicographic pair order, and — quantum variant only —
//! the task comparison qubits last. Standalone conflict circuits use the
//! same order with no problem block.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::model::{overlap_matrix, pair_index, SchedulingInstance, TaskInterval};
use crate::optimize::ParameterVector;
use crate::qubo::{qubit_index, split_hamiltonian, HcTermSet, IsingModel};
use crate::sim::{Circuit, Gate};
use crate::{Error, Result};

/// How conflict ancillas are driven: deterministically from the classical
/// interval test, or by the comparison network over task qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictVariant {
    Classical,
    Quantum,
}

impl std::fmt::Display for ConflictVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConflictVariant::Classical => "classical",
            ConflictVariant::Quantum => "quantum",
        })
    }
}

impl std::str::FromStr for ConflictVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(ConflictVariant::Classical),
            "quantum" => Ok(ConflictVariant::Quantum),
            other => Err(Error::Config(format!(
                "unknown conflict variant '{other}' (classical|quantum)"
            ))),
        }
    }
}

/// Whether the conflict angles `ζ` are their own parameter set or tied to
/// `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZetaMode {
    Independent,
    Shared,
}

impl std::fmt::Display for ZetaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZetaMode::Independent => "independent",
            ZetaMode::Shared => "shared",
        })
    }
}

impl std::str::FromStr for ZetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ZetaMode::Independent),
            "shared" => Ok(ZetaMode::Shared),
            other => Err(Error::Config(format!(
                "unknown zeta mode '{other}' (independent|shared)"
            ))),
        }
    }
}

/// Register map: where the problem block, the per-pair ancillas, and (quantum
/// variant) the task comparison qubits sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AncillaLayout {
    n_tasks: usize,
    n_problem: usize,
    n_task_qubits: usize,
}

impl AncillaLayout {
    pub fn new(n_tasks: usize, n_problem: usize, variant: ConflictVariant) -> Self {
        Self {
            n_tasks,
            n_problem,
            n_task_qubits: match variant {
                ConflictVariant::Classical => 0,
                ConflictVariant::Quantum => n_tasks,
            },
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn n_ancillas(&self) -> usize {
        self.n_tasks * (self.n_tasks - 1) / 2
    }

    pub fn n_task_qubits(&self) -> usize {
        self.n_task_qubits
    }

    /// Lexicographic offset of pair `(i, k)` within the ancilla block.
    pub fn pair_offset(&self, i: usize, k: usize) -> usize {
        let (a, b) = if i < k { (i, k) } else { (k, i) };
        pair_index(a, b, self.n_tasks)
    }

    pub fn ancilla_qubit(&self, i: usize, k: usize) -> usize {
        self.n_problem + self.pair_offset(i, k)
    }

    /// Physical qubit of comparison slot `s` (quantum variant).
    pub fn task_qubit(&self, slot: usize) -> usize {
        debug_assert!(slot < self.n_task_qubits);
        self.n_problem + self.n_ancillas() + slot
    }

    pub fn total_qubits(&self) -> usize {
        self.n_problem + self.n_ancillas() + self.n_task_qubits
    }

    pub fn problem_qubits(&self) -> std::ops::Range<usize> {
        0..self.n_problem
    }

    pub fn ancilla_qubits(&self) -> std::ops::Range<usize> {
        self.n_problem..self.n_problem + self.n_ancillas()
    }
}

/// Affine map of all task times onto `[0, π/2]` (min → 0, max → π/2); one
/// global factor, so every pairwise difference is preserved up to scale.
pub fn scale_times(instance: &SchedulingInstance) -> Result<Vec<TaskInterval>> {
    let tasks = instance.tasks();
    let t_min = tasks.iter().map(|t| t.start).fold(f64::INFINITY, f64::min);
    let t_max = tasks.iter().map(|t| t.end).fold(f64::NEG_INFINITY, f64::max);
    if t_max <= t_min {
        return Err(Error::InvalidInstance(
            "time scaling needs two distinct time points".into(),
        ));
    }
    let factor = FRAC_PI_2 / (t_max - t_min);
    Ok(tasks
        .iter()
        .map(|t| TaskInterval {
            start: (t.start - t_min) * factor,
            end: (t.end - t_min) * factor,
        })
        .collect())
}

/// One pairwise comparison: forward end-time rotations on the two carrier
/// qubits, the CCNOT recording the coefficient, then the inverse rotations.
/// `q_first` receives `RY(2·te_first)` and must carry the partner's negated
/// start rotation for the difference to form.
pub fn damselfly_gate(
    q_first: usize,
    q_second: usize,
    te_first: f64,
    te_second: f64,
    ancilla: usize,
) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(5);
    if te_first != 0.0 {
        gates.push(Gate::Ry {
            q: q_first,
            theta: 2.0 * te_first,
        });
    }
    if te_second != 0.0 {
        gates.push(Gate::Ry {
            q: q_second,
            theta: 2.0 * te_second,
        });
    }
    gates.push(Gate::Ccnot {
        c0: q_first,
        c1: q_second,
        target: ancilla,
    });
    if te_first != 0.0 {
        gates.push(Gate::Ry {
            q: q_first,
            theta: -2.0 * te_first,
        });
    }
    if te_second != 0.0 {
        gates.push(Gate::Ry {
            q: q_second,
            theta: -2.0 * te_second,
        });
    }
    gates
}

/// Analytic ancilla probability of the isolated comparison for pair `(i, k)`:
/// `sin²(π/4 + Δ₁)·sin²(π/4 + Δ₂)` with `Δ₁ = t̃_e^i - t̃_s^k`,
/// `Δ₂ = t̃_e^k - t̃_s^i` over the scaled times.
pub fn pair_overlap_probability(instance: &SchedulingInstance, i: usize, k: usize) -> Result<f64> {
    let scaled = scale_times(instance)?;
    let d1 = scaled[i].end - scaled[k].start;
    let d2 = scaled[k].end - scaled[i].start;
    Ok((PI / 4.0 + d1).sin().powi(2) * (PI / 4.0 + d2).sin().powi(2))
}

fn classical_conflict_gates(instance: &SchedulingInstance, layout: &AncillaLayout) -> Vec<Gate> {
    let tasks = instance.tasks();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        tasks[a]
            .start
            .partial_cmp(&tasks[b].start)
            .expect("finite start times")
            .then(a.cmp(&b))
    });
    let mut gates = Vec::new();
    for p in 0..order.len() {
        for q in p + 1..order.len() {
            let (earlier, later) = (order[p], order[q]);
            let anc = layout.ancilla_qubit(earlier.min(later), earlier.max(later));
            // signum(+0) = +1, so a task starting exactly at the other's end
            // rotates to |0⟩: touching intervals do not conflict.
            let angle = -FRAC_PI_2 * (tasks[later].start - tasks[earlier].end).signum();
            gates.push(Gate::H { q: anc });
            gates.push(Gate::Ry { q: anc, theta: angle });
        }
    }
    gates
}

fn quantum_conflict_gates(
    instance: &SchedulingInstance,
    layout: &AncillaLayout,
) -> Result<Vec<Gate>> {
    let scaled = scale_times(instance)?;
    let n = instance.n_tasks();
    let mut gates = Vec::new();
    for (slot, task) in scaled.iter().enumerate() {
        gates.push(Gate::H {
            q: layout.task_qubit(slot),
        });
        if task.start != 0.0 {
            gates.push(Gate::Ry {
                q: layout.task_qubit(slot),
                theta: -2.0 * task.start,
            });
        }
    }
    // holder[slot] = task whose start rotation the slot currently carries.
    let mut holder: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for k in i + 1..n {
            let a = holder.iter().position(|&t| t == i).expect("held token");
            let b = holder.iter().position(|&t| t == k).expect("held token");
            gates.push(Gate::Swap {
                a: layout.task_qubit(a),
                b: layout.task_qubit(b),
            });
            holder.swap(a, b);
            // Slot `a` now carries -t_s^k and receives the forward RY(2 t_e^i).
            gates.extend(damselfly_gate(
                layout.task_qubit(a),
                layout.task_qubit(b),
                scaled[i].end,
                scaled[k].end,
                layout.ancilla_qubit(i, k),
            ));
        }
    }
    Ok(gates)
}

pub(crate) fn conflict_gates(
    instance: &SchedulingInstance,
    layout: &AncillaLayout,
    variant: ConflictVariant,
) -> Result<Vec<Gate>> {
    match variant {
        ConflictVariant::Classical => Ok(classical_conflict_gates(instance, layout)),
        ConflictVariant::Quantum => quantum_conflict_gates(instance, layout),
    }
}

pub fn standalone_conflict_circuit(
    instance: &SchedulingInstance,
    variant: ConflictVariant,
) -> Result<(Circuit, AncillaLayout)> {
    let layout = AncillaLayout::new(instance.n_tasks(), 0, variant);
    let mut circuit = Circuit::new(layout.total_qubits());
    circuit.extend(conflict_gates(instance, &layout, variant)?)?;
    for q in layout.ancilla_qubits() {
        circuit.mark_measured(q)?;
    }
    Ok((circuit, layout))
}

/// Deterministic conflict front end: each pair's ancilla is prepared in the
/// basis state of the classical overlap test (`H` then `RY(∓π/2)`).
pub fn classical_conflict_circuit(
    instance: &SchedulingInstance,
) -> Result<(Circuit, AncillaLayout)> {
    standalone_conflict_circuit(instance, ConflictVariant::Classical)
}

/// Comparison-network front end over `N + N(N-1)/2` qubits: task qubits are
/// prepared with the negated start rotations, and each pair is visited by a
/// SWAP followed by a damselfly writing its ancilla.
///
/// Only a pair processed on still-unentangled carriers reads exactly the
/// analytic probability of [`pair_overlap_probability`]; each CCNOT leaves
/// its carriers entangled with the record, so later pairs deviate (the cost
/// of reusing `N` task qubits). [`pair_comparison_circuit`] isolates any
/// single pair when the exact value is wanted.
pub fn quantum_conflict_circuit(
    instance: &SchedulingInstance,
) -> Result<(Circuit, AncillaLayout)> {
    standalone_conflict_circuit(instance, ConflictVariant::Quantum)
}

/// The isolated comparison for one pair: qubit 0 is the ancilla, qubits 1
/// and 2 carry tasks `i` and `k`. Its ancilla reads exactly
/// [`pair_overlap_probability`].
pub fn pair_comparison_circuit(
    instance: &SchedulingInstance,
    i: usize,
    k: usize,
) -> Result<Circuit> {
    let n = instance.n_tasks();
    if i >= k || k >= n {
        return Err(Error::DimensionMismatch(format!(
            "pair ({i}, {k}) invalid for {n} tasks"
        )));
    }
    let scaled = scale_times(instance)?;
    let mut circuit = Circuit::new(3);
    circuit.push(Gate::H { q: 1 })?;
    circuit.push(Gate::H { q: 2 })?;
    if scaled[i].start != 0.0 {
        circuit.push(Gate::Ry {
            q: 1,
            theta: -2.0 * scaled[i].start,
        })?;
    }
    if scaled[k].start != 0.0 {
        circuit.push(Gate::Ry {
            q: 2,
            theta: -2.0 * scaled[k].start,
        })?;
    }
    circuit.push(Gate::Swap { a: 1, b: 2 })?;
    circuit.extend(damselfly_gate(1, 2, scaled[i].end, scaled[k].end, 0))?;
    circuit.mark_measured(0)?;
    Ok(circuit)
}

/// One `U(H_p, γ)` layer: `RZZ(2γ J_nm)` per coupling and `RZ(2γ J_nn)` per
/// field, on the problem qubits (spin `n` = qubit `n`). The constant is a
/// global phase and emits nothing; zero angles are skipped.
pub fn hp_layer(hp: &IsingModel, gamma: f64) -> Vec<Gate> {
    let mut gates = Vec::new();
    for (&(n, m), &j) in hp.quadratic() {
        let theta = 2.0 * gamma * j;
        if theta != 0.0 {
            gates.push(Gate::Rzz { a: n, b: m, theta });
        }
    }
    for (n, &j) in hp.linear().iter().enumerate() {
        let theta = 2.0 * gamma * j;
        if theta != 0.0 {
            gates.push(Gate::Rz { q: n, theta });
        }
    }
    gates
}

/// One `U(H_c, ζ)` layer: per (pair, resource) term, `CRZZ(2ζ·P/4)` on the
/// two same-resource qubits and `CRZ(-2ζ·P/4)` on each, all controlled by
/// the pair's ancilla. Per-term constants are phases and emit nothing.
pub fn hc_layer(hc: &HcTermSet, zeta: f64, layout: &AncillaLayout) -> Vec<Gate> {
    let mut gates = Vec::new();
    let zz_theta = 2.0 * zeta * hc.zz_coeff();
    let z_theta = 2.0 * zeta * hc.z_coeff();
    for term in hc.terms() {
        let control = layout.ancilla_qubit(term.i, term.k);
        let q_ij = qubit_index(term.i, term.j, hc.n_resources());
        let q_kj = qubit_index(term.k, term.j, hc.n_resources());
        if zz_theta != 0.0 {
            gates.push(Gate::Crzz {
                control,
                a: q_ij,
                b: q_kj,
                theta: zz_theta,
            });
        }
        if z_theta != 0.0 {
            gates.push(Gate::Crz {
                control,
                q: q_ij,
                theta: z_theta,
            });
            gates.push(Gate::Crz {
                control,
                q: q_kj,
                theta: z_theta,
            });
        }
    }
    gates
}

/// One mixer layer: `RX(2β)` on every problem qubit.
pub fn hb_layer(beta: f64, n_problem: usize) -> Vec<Gate> {
    let theta = 2.0 * beta;
    if theta == 0.0 {
        return Vec::new();
    }
    (0..n_problem)
        .map(|q| Gate::Rx { q, theta })
        .collect()
}

/// Ansatz shape: depth, ζ handling, conflict front end, and whether ancilla
/// gates for knowably conflict-free pairs are dropped (kept by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnsatzConfig {
    pub depth: usize,
    pub zeta_mode: ZetaMode,
    pub variant: ConflictVariant,
    pub prune: bool,
}

impl AnsatzConfig {
    pub fn new(depth: usize, zeta_mode: ZetaMode, variant: ConflictVariant) -> Self {
        Self {
            depth,
            zeta_mode,
            variant,
            prune: false,
        }
    }
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self::new(10, ZetaMode::Independent, ConflictVariant::Classical)
    }
}

/// The assembled circuit plus its register map.
#[derive(Debug, Clone)]
pub struct QtisCircuit {
    pub circuit: Circuit,
    pub layout: AncillaLayout,
}

impl QtisCircuit {
    pub fn problem_qubits(&self) -> Vec<usize> {
        self.layout.problem_qubits().collect()
    }

    pub fn ancilla_qubits(&self) -> Vec<usize> {
        self.layout.ancilla_qubits().collect()
    }
}

/// Assembles the full ansatz: conflict front end, Hadamards on the problem
/// register, then `depth` layers of `U(H_p, γ_l)`, `U(H_c, ζ_l)`,
/// `U(H_B, β_l)`. Problem and ancilla qubits are marked measured.
pub fn build_ansatz(
    instance: &SchedulingInstance,
    config: &AnsatzConfig,
    params: &ParameterVector,
) -> Result<QtisCircuit> {
    if params.depth() != config.depth {
        return Err(Error::ParameterMismatch(format!(
            "parameters sized for depth {}, ansatz depth {}",
            params.depth(),
            config.depth
        )));
    }
    if params.zeta_mode() != config.zeta_mode {
        return Err(Error::ParameterMismatch(format!(
            "parameters are {} mode, ansatz wants {}",
            params.zeta_mode(),
            config.zeta_mode
        )));
    }
    let overlaps = overlap_matrix(instance);
    let (hp, hc) = split_hamiltonian(instance, &overlaps);
    let hc = if config.prune { hc.pruned() } else { hc };
    let layout = AncillaLayout::new(instance.n_tasks(), instance.n_vars(), config.variant);

    let mut circuit = Circuit::new(layout.total_qubits());
    circuit.extend(conflict_gates(instance, &layout, config.variant)?)?;
    for q in layout.problem_qubits() {
        circuit.push(Gate::H { q })?;
    }
    for l in 0..config.depth {
        circuit.extend(hp_layer(&hp, params.gamma()[l]))?;
        circuit.extend(hc_layer(&hc, params.effective_zeta(l), &layout))?;
        circuit.extend(hb_layer(params.beta()[l], layout.problem_qubits().len()))?;
    }
    for q in layout.problem_qubits().chain(layout.ancilla_qubits()) {
        circuit.mark_measured(q)?;
    }
    Ok(QtisCircuit { circuit, layout })
}
