//! Classical minimization of the normalized circuit energy over the angle
//! vectors (γ⃗, ζ⃗, β⃗): the shared objective machinery, a COBYLA wrapper,
//! and the Standard, T-QAOA, and HT-QAOA strategies.
//!
//! The hot path avoids rebuilding circuits per evaluation: the conflict
//! front end and problem-register Hadamards are parameter-free, so their
//! output state is prepared once, and each evaluation replays only the
//! layers. `H_p` and the gated `H_c` are diagonal, letting a layer collapse
//! into one phase pass plus the mixer rotations.

use std::cell::Cell;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use crate::circuits::{conflict_gates, AncillaLayout, AnsatzConfig, ZetaMode};
use crate::model::SchedulingInstance;
use crate::qubo::{
    build_hp_qubo, build_qubo, energy_bounds, qubit_index, split_hamiltonian,
};
use crate::sim::{apply_gate, sample, Gate, SampleCounts, StateVector};
use crate::{Error, Result};

/// Per-eval seed spacing for the sampled estimator.
const EVAL_SEED_MIX: u64 = 0x2545_F491_4F6C_DD1D;

/// The ansatz angles: `gamma` and `beta` always, `zeta` only in independent
/// mode (shared mode reuses `gamma` for the conflict layers).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    gamma: Vec<f64>,
    zeta: Option<Vec<f64>>,
    beta: Vec<f64>,
}

impl ParameterVector {
    pub fn new(gamma: Vec<f64>, zeta: Option<Vec<f64>>, beta: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::ParameterMismatch("depth must be at least 1".into()));
        }
        if beta.len() != gamma.len() || zeta.as_ref().is_some_and(|z| z.len() != gamma.len()) {
            return Err(Error::ParameterMismatch(format!(
                "angle arrays disagree on depth: gamma {}, zeta {:?}, beta {}",
                gamma.len(),
                zeta.as_ref().map(Vec::len),
                beta.len()
            )));
        }
        let finite = gamma
            .iter()
            .chain(zeta.iter().flatten())
            .chain(&beta)
            .all(|a| a.is_finite());
        if !finite {
            return Err(Error::ParameterMismatch("non-finite angle".into()));
        }
        Ok(Self { gamma, zeta, beta })
    }

    pub fn depth(&self) -> usize {
        self.gamma.len()
    }

    pub fn zeta_mode(&self) -> ZetaMode {
        if self.zeta.is_some() {
            ZetaMode::Independent
        } else {
            ZetaMode::Shared
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn zeta(&self) -> Option<&[f64]> {
        self.zeta.as_deref()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Conflict angle of layer `l`: `ζ_l`, or `γ_l` in shared mode.
    pub fn effective_zeta(&self, l: usize) -> f64 {
        match &self.zeta {
            Some(z) => z[l],
            None => self.gamma[l],
        }
    }

    pub fn n_params(&self) -> usize {
        self.gamma.len() * if self.zeta.is_some() { 3 } else { 2 }
    }

    /// Flat layout `[γ₁..γ_L, ζ₁..ζ_L, β₁..β_L]` (ζ block absent in shared
    /// mode).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.gamma.clone();
        if let Some(z) = &self.zeta {
            flat.extend_from_slice(z);
        }
        flat.extend_from_slice(&self.beta);
        flat
    }

    pub fn from_flat(flat: &[f64], depth: usize, zeta_mode: ZetaMode) -> Result<Self> {
        let blocks = match zeta_mode {
            ZetaMode::Independent => 3,
            ZetaMode::Shared => 2,
        };
        if flat.len() != blocks * depth {
            return Err(Error::ParameterMismatch(format!(
                "{} flat values for depth {depth} in {zeta_mode} mode",
                flat.len()
            )));
        }
        let gamma = flat[..depth].to_vec();
        let (zeta, beta) = match zeta_mode {
            ZetaMode::Independent => (
                Some(flat[depth..2 * depth].to_vec()),
                flat[2 * depth..].to_vec(),
            ),
            ZetaMode::Shared => (None, flat[depth..].to_vec()),
        };
        Self::new(gamma, zeta, beta)
    }
}

/// All angles i.i.d. uniform on `[0, π]`, drawn γ block, ζ block, β block.
pub fn init_random_params<R: Rng + ?Sized>(
    depth: usize,
    zeta_mode: ZetaMode,
    rng: &mut R,
) -> ParameterVector {
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.random_range(0.0..=std::f64::consts::PI))
            .collect()
    };
    let gamma = draw(depth);
    let zeta = match zeta_mode {
        ZetaMode::Independent => Some(draw(depth)),
        ZetaMode::Shared => None,
    };
    let beta = draw(depth);
    ParameterVector { gamma, zeta, beta }
}

/// How the objective reads energies off the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Full expectation over the statevector; deterministic.
    Exact,
    /// Monte-Carlo estimate from `shots` measurement draws.
    Sampled { shots: u64 },
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Exact => f.write_str("exact"),
            Estimator::Sampled { shots } => write!(f, "sampled:{shots}"),
        }
    }
}

/// Which conflict coefficients score a measured bitstring: the classical
/// ground truth, or the ancilla bits measured alongside the assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    GroundTruth,
    FromAncilla,
}

/// COBYLA settings plus the run seed and energy-estimation choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_evaluations: usize,
    pub initial_step: f64,
    pub final_step: f64,
    pub rng_seed: u64,
    pub estimator: Estimator,
    pub score_mode: ScoreMode,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            initial_step: 0.3,
            final_step: 1e-3,
            rng_seed: 0,
            estimator: Estimator::Exact,
            score_mode: ScoreMode::GroundTruth,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations < 1 {
            return Err(Error::Config("max_evaluations must be at least 1".into()));
        }
        if !(self.final_step > 0.0 && self.final_step < self.initial_step) {
            return Err(Error::Config(format!(
                "need 0 < final_step < initial_step, got {} and {}",
                self.final_step, self.initial_step
            )));
        }
        Ok(())
    }
}

/// `(E - e_min_ideal) / (e_max - e_min_ideal)`.
pub fn normalized_energy(raw: f64, e_min_ideal: f64, e_max: f64) -> f64 {
    (raw - e_min_ideal) / (e_max - e_min_ideal)
}

/// Everything evaluation-invariant about one (instance, ansatz) pairing:
/// the prepared pre-layer state, the diagonal phase tables of `H_p` and the
/// gated `H_c`, and the scoring table over measured bitstrings.
pub struct ProblemContext {
    config: AnsatzConfig,
    layout: AncillaLayout,
    prepared: StateVector,
    n_measured: usize,
    dp: Vec<f64>,
    dc: Vec<f64>,
    energy_table: Vec<f64>,
    e_min_ideal: f64,
    e_max: f64,
}

impl ProblemContext {
    pub fn new(
        instance: &SchedulingInstance,
        config: &AnsatzConfig,
        score_mode: ScoreMode,
    ) -> Result<Self> {
        let overlaps = crate::model::overlap_matrix(instance);
        let (hp, hc) = split_hamiltonian(instance, &overlaps);
        let hc = if config.prune { hc.pruned() } else { hc };
        let layout = AncillaLayout::new(instance.n_tasks(), instance.n_vars(), config.variant);
        let n_problem = instance.n_vars();
        let n_measured = n_problem + layout.n_ancillas();

        let mut prepared = StateVector::zero_state(layout.total_qubits());
        for gate in conflict_gates(instance, &layout, config.variant)? {
            apply_gate(&mut prepared, &gate)?;
        }
        for q in 0..n_problem {
            apply_gate(&mut prepared, &Gate::H { q })?;
        }

        let j_count = instance.resources();
        let penalty = instance.penalty();
        let full_qubo = build_qubo(instance, &overlaps);
        let hp_qubo = build_hp_qubo(instance);
        let spin = |zm: usize, var: usize| 1.0 - 2.0 * ((zm >> var) & 1) as f64;

        let mut dp = vec![0.0; 1 << n_measured];
        let mut dc = vec![0.0; 1 << n_measured];
        let mut energy_table = vec![0.0; 1 << n_measured];
        let mut bits = vec![0u8; n_problem];
        for zm in 0..1usize << n_measured {
            for (v, bit) in bits.iter_mut().enumerate() {
                *bit = ((zm >> v) & 1) as u8;
            }
            dp[zm] = hp.evaluate_bits(&bits)? - hp.constant();
            for term in hc.terms() {
                if (zm >> (n_problem + layout.pair_offset(term.i, term.k))) & 1 == 1 {
                    let s_ij = spin(zm, qubit_index(term.i, term.j, j_count));
                    let s_kj = spin(zm, qubit_index(term.k, term.j, j_count));
                    dc[zm] += hc.zz_coeff() * s_ij * s_kj + hc.z_coeff() * (s_ij + s_kj);
                }
            }
            energy_table[zm] = match score_mode {
                ScoreMode::GroundTruth => full_qubo.evaluate(&bits)?,
                ScoreMode::FromAncilla => {
                    let mut e = hp_qubo.evaluate(&bits)?;
                    for (i, k, _) in overlaps.pairs() {
                        if (zm >> (n_problem + layout.pair_offset(i, k))) & 1 == 1 {
                            for j in 0..j_count {
                                if bits[qubit_index(i, j, j_count)] != 0
                                    && bits[qubit_index(k, j, j_count)] != 0
                                {
                                    e += penalty;
                                }
                            }
                        }
                    }
                    e
                }
            };
        }
        let (e_min_ideal, e_max) = energy_bounds(instance, &overlaps);
        Ok(Self {
            config: *config,
            layout,
            prepared,
            n_measured,
            dp,
            dc,
            energy_table,
            e_min_ideal,
            e_max,
        })
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn n_measured(&self) -> usize {
        self.n_measured
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        (0..self.n_measured).collect()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.e_min_ideal, self.e_max)
    }

    /// Final state for the given angles, equal to running the full ansatz
    /// circuit gate by gate.
    pub fn evolve(&self, params: &ParameterVector) -> Result<StateVector> {
        if params.depth() != self.config.depth || params.zeta_mode() != self.config.zeta_mode {
            return Err(Error::ParameterMismatch(format!(
                "parameters ({} layers, {} mode) do not fit the context ({} layers, {} mode)",
                params.depth(),
                params.zeta_mode(),
                self.config.depth,
                self.config.zeta_mode
            )));
        }
        let mut state = self.prepared.clone();
        let mask = (1usize << self.n_measured) - 1;
        let n_problem = self.layout.problem_qubits().len();
        let mut phases = vec![Complex64::ONE; 1 << self.n_measured];
        for l in 0..params.depth() {
            let gamma = params.gamma()[l];
            let zeta = params.effective_zeta(l);
            if gamma != 0.0 || zeta != 0.0 {
                for (zm, phase) in phases.iter_mut().enumerate() {
                    *phase =
                        Complex64::from_polar(1.0, -(gamma * self.dp[zm] + zeta * self.dc[zm]));
                }
                for (z, amp) in state.amps_mut().iter_mut().enumerate() {
                    *amp *= phases[z & mask];
                }
            }
            let beta = params.beta()[l];
            if beta != 0.0 {
                for q in 0..n_problem {
                    apply_gate(&mut state, &Gate::Rx { q, theta: 2.0 * beta })?;
                }
            }
        }
        Ok(state)
    }

    /// Exact energy expectation over measured bits (ancillas beyond the
    /// scoring table's reach are marginalized by the index mask).
    pub fn raw_energy_exact(&self, state: &StateVector) -> f64 {
        let mask = (1usize << self.n_measured) - 1;
        state
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(z, a)| a.norm_sqr() * self.energy_table[z & mask])
            .sum()
    }

    /// Mean and variance of the energy under the measurement distribution.
    pub fn raw_energy_moments(&self, state: &StateVector) -> (f64, f64) {
        let mask = (1usize << self.n_measured) - 1;
        let (mut mean, mut second) = (0.0, 0.0);
        for (z, a) in state.amplitudes().iter().enumerate() {
            let p = a.norm_sqr();
            let e = self.energy_table[z & mask];
            mean += p * e;
            second += p * e * e;
        }
        (mean, second - mean * mean)
    }

    /// Shot-based energy estimate plus the measured-register counts.
    pub fn raw_energy_sampled(
        &self,
        state: &StateVector,
        shots: u64,
        seed: u64,
    ) -> (f64, SampleCounts) {
        let counts = sample(state, shots, seed).marginal(&self.measured_qubits());
        let total: f64 = counts
            .counts()
            .iter()
            .map(|(&z, &c)| c as f64 * self.energy_table[z as usize])
            .sum();
        (total / shots as f64, counts)
    }

    pub fn normalize(&self, raw: f64) -> f64 {
        normalized_energy(raw, self.e_min_ideal, self.e_max)
    }
}

/// Normalized energy of the ansatz state for the given angles, scored
/// against the ground-truth QUBO. The sampled estimator uses a fixed draw
/// seed, so this function is deterministic in both modes.
pub fn objective(
    params: &ParameterVector,
    instance: &SchedulingInstance,
    config: &AnsatzConfig,
    estimator: Estimator,
) -> Result<f64> {
    let ctx = ProblemContext::new(instance, config, ScoreMode::GroundTruth)?;
    let state = ctx.evolve(params)?;
    let raw = match estimator {
        Estimator::Exact => ctx.raw_energy_exact(&state),
        Estimator::Sampled { shots } => ctx.raw_energy_sampled(&state, shots, 0).0,
    };
    Ok(ctx.normalize(raw))
}

/// Outcome of one COBYLA minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: usize,
    /// False when the evaluation budget ran out before the trust region
    /// shrank to `final_step`.
    pub converged: bool,
}

/// Unconstrained COBYLA minimization: trust region from `initial_step`,
/// termination when every coordinate step falls below `final_step` or the
/// evaluation budget is spent (then `converged = false`, best-so-far kept).
pub fn cobyla_minimize(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    options: &OptimizerOptions,
) -> MinimizeOutcome {
    let n = x0.len();
    let evaluations = Cell::new(0usize);
    let wrapped = |x: &[f64], _: &mut ()| {
        evaluations.set(evaluations.get() + 1);
        f(x)
    };
    let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    let cons: Vec<&dyn cobyla::Func<()>> = Vec::new();
    let stop = cobyla::StopTols {
        xtol_abs: vec![options.final_step; n],
        ..Default::default()
    };
    let outcome = cobyla::minimize(
        wrapped,
        x0,
        &bounds,
        &cons,
        (),
        options.max_evaluations,
        cobyla::RhoBeg::All(options.initial_step),
        Some(stop),
    );
    match outcome {
        Ok((status, x_best, f_best)) => MinimizeOutcome {
            x_best,
            f_best,
            evaluations: evaluations.get(),
            converged: !matches!(status, cobyla::SuccessStatus::MaxEvalReached),
        },
        Err((_, x_best, f_best)) => MinimizeOutcome {
            x_best,
            f_best,
            evaluations: evaluations.get(),
            converged: false,
        },
    }
}

/// Final measurement record of a run: the exact distribution or the drawn
/// counts, over the measured (problem + ancilla) register.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalDistribution {
    Exact { probabilities: Vec<f64>, n_bits: usize },
    Sampled(SampleCounts),
}

impl FinalDistribution {
    pub fn n_bits(&self) -> usize {
        match self {
            FinalDistribution::Exact { n_bits, .. } => *n_bits,
            FinalDistribution::Sampled(counts) => counts.n_qubits(),
        }
    }

    /// Most likely outcome; ties break toward the lowest basis index.
    pub fn modal(&self) -> u64 {
        match self {
            FinalDistribution::Exact { probabilities, .. } => {
                let mut best = 0usize;
                for (z, p) in probabilities.iter().enumerate() {
                    if *p > probabilities[best] {
                        best = z;
                    }
                }
                best as u64
            }
            FinalDistribution::Sampled(counts) => counts.modal().map_or(0, |(z, _)| z),
        }
    }
}

/// One finished optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub best_params: ParameterVector,
    pub e_norm: f64,
    pub raw_energy: f64,
    pub distribution: FinalDistribution,
    pub wall_time: f64,
    pub evaluations: usize,
    pub seed: u64,
    pub converged: bool,
    /// Best normalized energy after each minimization stage: one entry for
    /// Standard, `L` for T-QAOA, two for HT-QAOA.
    pub depth_trace: Vec<f64>,
}

impl RunResult {
    /// Modal measured outcome (problem + ancilla bits).
    pub fn modal_outcome(&self) -> u64 {
        self.distribution.modal()
    }
}

fn eval_seed(rng_seed: u64, eval_index: u64) -> u64 {
    rng_seed ^ eval_index.wrapping_mul(EVAL_SEED_MIX)
}

fn minimize_stage(
    ctx: &ProblemContext,
    init: &ParameterVector,
    options: &OptimizerOptions,
) -> Result<(ParameterVector, MinimizeOutcome)> {
    let depth = init.depth();
    let mode = init.zeta_mode();
    let eval_index = Cell::new(0u64);
    let f = |x: &[f64]| -> f64 {
        let idx = eval_index.get();
        eval_index.set(idx + 1);
        let params = match ParameterVector::from_flat(x, depth, mode) {
            Ok(p) => p,
            Err(_) => return f64::MAX,
        };
        let state = match ctx.evolve(&params) {
            Ok(s) => s,
            Err(_) => return f64::MAX,
        };
        let raw = match options.estimator {
            Estimator::Exact => ctx.raw_energy_exact(&state),
            Estimator::Sampled { shots } => {
                ctx.raw_energy_sampled(&state, shots, eval_seed(options.rng_seed, idx))
                    .0
            }
        };
        ctx.normalize(raw)
    };
    let outcome = cobyla_minimize(f, &init.to_flat(), options);
    let best = ParameterVector::from_flat(&outcome.x_best, depth, mode)?;
    Ok((best, outcome))
}

fn finalize(
    ctx: &ProblemContext,
    params: ParameterVector,
    options: &OptimizerOptions,
    depth_trace: Vec<f64>,
    evaluations: usize,
    converged: bool,
    started: Instant,
) -> Result<RunResult> {
    let state = ctx.evolve(&params)?;
    let (raw, distribution) = match options.estimator {
        Estimator::Exact => {
            let raw = ctx.raw_energy_exact(&state);
            let probabilities = state.marginal_probabilities(&ctx.measured_qubits())?;
            (
                raw,
                FinalDistribution::Exact {
                    probabilities,
                    n_bits: ctx.n_measured,
                },
            )
        }
        Estimator::Sampled { shots } => {
            let (raw, counts) =
                ctx.raw_energy_sampled(&state, shots, eval_seed(options.rng_seed, u64::MAX));
            (raw, FinalDistribution::Sampled(counts))
        }
    };
    Ok(RunResult {
        e_norm: ctx.normalize(raw),
        raw_energy: raw,
        best_params: params,
        distribution,
        wall_time: started.elapsed().as_secs_f64(),
        evaluations,
        seed: options.rng_seed,
        converged,
        depth_trace,
    })
}

/// One full-depth minimization from a uniform-random start.
pub fn strategy_standard<R: Rng + ?Sized>(
    instance: &SchedulingInstance,
    config: &AnsatzConfig,
    options: &OptimizerOptions,
    rng: &mut R,
) -> Result<RunResult> {
    options.validate()?;
    let started = Instant::now();
    let ctx = ProblemContext::new(instance, config, options.score_mode)?;
    let init = init_random_params(config.depth, config.zeta_mode, rng);
    let (best, outcome) = minimize_stage(&ctx, &init, options)?;
    finalize(
        &ctx,
        best,
        options,
        vec![outcome.f_best],
        outcome.evaluations,
        outcome.converged,
        started,
    )
}

/// Warm start for the next T-QAOA depth: γ and ζ keep their layers and seed
/// the new layer with the last one's value; β keeps its layers and opens the
/// new one at zero.
pub fn tqaoa_warm_start(params: &ParameterVector) -> ParameterVector {
    let extend_copy = |v: &[f64]| {
        let mut out = v.to_vec();
        out.push(*v.last().expect("depth >= 1"));
        out
    };
    let mut beta = params.beta.clone();
    beta.push(0.0);
    ParameterVector {
        gamma: extend_copy(&params.gamma),
        zeta: params.zeta.as_deref().map(extend_copy),
        beta,
    }
}

/// Depth-by-depth minimization: depth 1 from a random start, each deeper
/// stage warm-started from the previous optimum.
pub fn strategy_tqaoa<R: Rng + ?Sized>(
    instance: &SchedulingInstance,
    config: &AnsatzConfig,
    options: &OptimizerOptions,
    rng: &mut R,
) -> Result<RunResult> {
    options.validate()?;
    let started = Instant::now();
    let mut params = init_random_params(1, config.zeta_mode, rng);
    let mut depth_trace = Vec::with_capacity(config.depth);
    let mut evaluations = 0;
    let mut converged = true;
    let mut final_ctx = None;
    for depth in 1..=config.depth {
        if depth > 1 {
            params = tqaoa_warm_start(&params);
        }
        let stage_config = AnsatzConfig { depth, ..*config };
        let ctx = ProblemContext::new(instance, &stage_config, options.score_mode)?;
        let (best, outcome) = minimize_stage(&ctx, &params, options)?;
        params = best;
        depth_trace.push(outcome.f_best);
        evaluations += outcome.evaluations;
        converged &= outcome.converged;
        if depth == config.depth {
            final_ctx = Some(ctx);
        }
    }
    finalize(
        &final_ctx.expect("depth >= 1"),
        params,
        options,
        depth_trace,
        evaluations,
        converged,
        started,
    )
}

/// Full-depth start from a depth-1 optimum: layer `l` takes
/// `a₁ + (l-1)/(L-1)·(endpoint - a₁)`, with endpoints π for γ and ζ and 0
/// for β.
pub fn htqaoa_interpolate(stage_one: &ParameterVector, depth: usize) -> Result<ParameterVector> {
    if stage_one.depth() != 1 {
        return Err(Error::ParameterMismatch(format!(
            "interpolation starts from a depth-1 vector, got depth {}",
            stage_one.depth()
        )));
    }
    if depth < 2 {
        return Err(Error::Config(
            "linear interpolation needs a target depth of at least 2".into(),
        ));
    }
    let line = |a1: f64, endpoint: f64| -> Vec<f64> {
        (0..depth)
            .map(|l| a1 + l as f64 / (depth - 1) as f64 * (endpoint - a1))
            .collect()
    };
    Ok(ParameterVector {
        gamma: line(stage_one.gamma[0], std::f64::consts::PI),
        zeta: stage_one
            .zeta
            .as_ref()
            .map(|z| line(z[0], std::f64::consts::PI)),
        beta: line(stage_one.beta[0], 0.0),
    })
}

/// Two-stage minimization: depth 1 from a random start, then the full depth
/// from the linear interpolation of the depth-1 optimum.
pub fn strategy_htqaoa<R: Rng + ?Sized>(
    instance: &SchedulingInstance,
    config: &AnsatzConfig,
    options: &OptimizerOptions,
    rng: &mut R,
) -> Result<RunResult> {
    options.validate()?;
    if config.depth < 2 {
        return Err(Error::Config(
            "htqaoa needs depth >= 2 (single-layer runs are the standard strategy)".into(),
        ));
    }
    let started = Instant::now();
    let stage_config = AnsatzConfig { depth: 1, ..*config };
    let stage_ctx = ProblemContext::new(instance, &stage_config, options.score_mode)?;
    let init = init_random_params(1, config.zeta_mode, rng);
    let (stage_best, stage_outcome) = minimize_stage(&stage_ctx, &init, options)?;

    let ctx = ProblemContext::new(instance, config, options.score_mode)?;
    let interpolated = htqaoa_interpolate(&stage_best, config.depth)?;
    let (best, outcome) = minimize_stage(&ctx, &interpolated, options)?;
    finalize(
        &ctx,
        best,
        options,
        vec![stage_outcome.f_best, outcome.f_best],
        stage_outcome.evaluations + outcome.evaluations,
        stage_outcome.converged && outcome.converged,
        started,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_ansatz, ConflictVariant};
    use crate::model::builtin_test_set;
    use crate::qubo::instance_qubo;
    use crate::sim::run_circuit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn config(depth: usize, zeta_mode: ZetaMode) -> AnsatzConfig {
        AnsatzConfig::new(depth, zeta_mode, ConflictVariant::Classical)
    }

    fn quick_options(seed: u64) -> OptimizerOptions {
        OptimizerOptions {
            max_evaluations: 400,
            rng_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn random_init_counts_range_and_determinism() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = init_random_params(10, ZetaMode::Independent, &mut rng);
        assert_eq!(p.n_params(), 30);
        let q = init_random_params(10, ZetaMode::Shared, &mut rng);
        assert_eq!(q.n_params(), 20);
        assert!(q.zeta().is_none());
        for &a in p.to_flat().iter().chain(&q.to_flat()) {
            assert!((0.0..=std::f64::consts::PI).contains(&a));
        }

        let mut r1 = ChaCha20Rng::seed_from_u64(77);
        let mut r2 = ChaCha20Rng::seed_from_u64(77);
        assert_eq!(
            init_random_params(4, ZetaMode::Independent, &mut r1),
            init_random_params(4, ZetaMode::Independent, &mut r2)
        );
    }

    #[test]
    fn flat_round_trip_both_modes() {
        let p = ParameterVector::new(vec![0.1, 0.2], Some(vec![0.3, 0.4]), vec![0.5, 0.6]).unwrap();
        assert_eq!(p.to_flat(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(
            ParameterVector::from_flat(&p.to_flat(), 2, ZetaMode::Independent).unwrap(),
            p
        );
        let s = ParameterVector::new(vec![0.1, 0.2], None, vec![0.5, 0.6]).unwrap();
        assert_eq!(s.to_flat(), vec![0.1, 0.2, 0.5, 0.6]);
        assert_eq!(
            ParameterVector::from_flat(&s.to_flat(), 2, ZetaMode::Shared).unwrap(),
            s
        );
        assert!(ParameterVector::from_flat(&[0.0; 5], 2, ZetaMode::Shared).is_err());
        assert!(ParameterVector::new(vec![0.0], Some(vec![f64::NAN]), vec![0.0]).is_err());
    }

    #[test]
    fn zero_angles_give_the_uniform_state_energy() {
        let instance = builtin_test_set(4).unwrap();
        let params = ParameterVector::new(vec![0.0; 3], Some(vec![0.0; 3]), vec![0.0; 3]).unwrap();
        let e = objective(
            &params,
            &instance,
            &config(3, ZetaMode::Independent),
            Estimator::Exact,
        )
        .unwrap();
        // Mean QUBO over 64 bitstrings is 7.5; bounds are (-3, 15).
        assert!((e - (7.5 + 3.0) / 18.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn fast_evolution_matches_the_gate_circuit() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for variant in [ConflictVariant::Classical, ConflictVariant::Quantum] {
            for zeta_mode in [ZetaMode::Independent, ZetaMode::Shared] {
                for id in [1, 2, 5] {
                    let instance = builtin_test_set(id).unwrap();
                    let cfg = AnsatzConfig::new(3, zeta_mode, variant);
                    let params = init_random_params(3, zeta_mode, &mut rng);
                    let ctx = ProblemContext::new(&instance, &cfg, ScoreMode::GroundTruth).unwrap();
                    let fast = ctx.evolve(&params).unwrap();
                    let ansatz = build_ansatz(&instance, &cfg, &params).unwrap();
                    let slow = run_circuit(
                        &ansatz.circuit,
                        &StateVector::zero_state(ansatz.circuit.n_qubits()),
                    )
                    .unwrap();
                    assert!(
                        fast.fidelity(&slow) >= 1.0 - 1e-12,
                        "set {id}, {variant}, {zeta_mode}"
                    );
                    for (a, b) in fast.amplitudes().iter().zip(slow.amplitudes()) {
                        assert!((a - b).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn shared_mode_equals_independent_constrained_to_equal_angles() {
        let instance = builtin_test_set(2).unwrap();
        let gamma = vec![0.8, 0.15, 2.4];
        let beta = vec![0.3, 1.0, 0.05];
        let shared = ParameterVector::new(gamma.clone(), None, beta.clone()).unwrap();
        let tied = ParameterVector::new(gamma.clone(), Some(gamma), beta).unwrap();
        let a = objective(
            &shared,
            &instance,
            &config(3, ZetaMode::Shared),
            Estimator::Exact,
        )
        .unwrap();
        let b = objective(
            &tied,
            &instance,
            &config(3, ZetaMode::Independent),
            Estimator::Exact,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_is_shift_invariant_and_bounded() {
        for c in [-11.0, 0.0, 3.5, 100.0] {
            let base = normalized_energy(4.0, -3.0, 15.0);
            let shifted = normalized_energy(4.0 + c, -3.0 + c, 15.0 + c);
            assert!((base - shifted).abs() < 1e-12);
        }

        // Expectations can exceed e_max (all-ones is not the global max),
        // but never drop below the ideal floor.
        let instance = builtin_test_set(2).unwrap();
        let table = instance_qubo(&instance).energy_table().unwrap();
        let worst = table.iter().cloned().fold(f64::MIN, f64::max);
        let cap = normalized_energy(worst, -3.0, 57.0);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..5 {
            let params = init_random_params(2, ZetaMode::Independent, &mut rng);
            let e = objective(
                &params,
                &instance,
                &config(2, ZetaMode::Independent),
                Estimator::Exact,
            )
            .unwrap();
            assert!(e >= 0.0 && e <= cap, "{e} vs cap {cap}");
        }
    }

    #[test]
    fn sampled_estimator_tracks_the_exact_expectation() {
        let instance = builtin_test_set(1).unwrap();
        let cfg = config(2, ZetaMode::Independent);
        let ctx = ProblemContext::new(&instance, &cfg, ScoreMode::GroundTruth).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        for trial in 0..4 {
            let params = init_random_params(2, ZetaMode::Independent, &mut rng);
            let state = ctx.evolve(&params).unwrap();
            let (exact, variance) = ctx.raw_energy_moments(&state);
            let shots = 50_000u64;
            let (estimate, _) = ctx.raw_energy_sampled(&state, shots, 1000 + trial);
            let se = (variance / shots as f64).sqrt();
            assert!(
                (estimate - exact).abs() <= 3.0 * se + 1e-9,
                "trial {trial}: {estimate} vs {exact} (se {se})"
            );
        }
    }

    #[test]
    fn cobyla_solves_a_quadratic_and_respects_the_budget() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let options = OptimizerOptions {
            max_evaluations: 500,
            ..Default::default()
        };
        let outcome = cobyla_minimize(f, &[0.0; 6], &options);
        assert!(outcome.f_best < 1e-4, "{}", outcome.f_best);
        assert!(outcome.converged);
        assert!(outcome.evaluations <= 500);

        let strict = OptimizerOptions {
            max_evaluations: 1,
            ..Default::default()
        };
        let stuck = cobyla_minimize(f, &[0.25; 3], &strict);
        assert_eq!(stuck.x_best, vec![0.25; 3]);
        assert!(!stuck.converged);
        assert_eq!(stuck.evaluations, 1);
    }

    #[test]
    fn cobyla_trajectory_is_deterministic() {
        let run = || {
            let seen = std::cell::RefCell::new(Vec::new());
            let f = |x: &[f64]| {
                let v = (x[0] - 0.3).powi(2) + (x[1] + 1.1).powi(2) * 2.0;
                seen.borrow_mut().push((x.to_vec(), v));
                v
            };
            let outcome = cobyla_minimize(f, &[0.9, 0.4], &OptimizerOptions::default());
            (seen.into_inner(), outcome)
        };
        let (trace_a, out_a) = run();
        let (trace_b, out_b) = run();
        assert_eq!(trace_a, trace_b);
        assert_eq!(out_a, out_b);
    }

    #[test]
    fn warm_start_follows_the_layer_rules() {
        let p = ParameterVector::new(
            vec![0.1, 0.2],
            Some(vec![0.3, 0.4]),
            vec![0.5, 0.6],
        )
        .unwrap();
        let w = tqaoa_warm_start(&p);
        assert_eq!(w.gamma(), &[0.1, 0.2, 0.2]);
        assert_eq!(w.zeta().unwrap(), &[0.3, 0.4, 0.4]);
        assert_eq!(w.beta(), &[0.5, 0.6, 0.0]);

        let s = ParameterVector::new(vec![1.0], None, vec![2.0]).unwrap();
        let ws = tqaoa_warm_start(&s);
        assert_eq!(ws.gamma(), &[1.0, 1.0]);
        assert!(ws.zeta().is_none());
        assert_eq!(ws.beta(), &[2.0, 0.0]);
    }

    #[test]
    fn interpolation_endpoints_and_monotonicity() {
        let one = ParameterVector::new(vec![0.4], Some(vec![1.2]), vec![0.9]).unwrap();
        let two = htqaoa_interpolate(&one, 2).unwrap();
        assert_eq!(two.gamma(), &[0.4, std::f64::consts::PI]);
        assert_eq!(two.zeta().unwrap(), &[1.2, std::f64::consts::PI]);
        assert_eq!(two.beta(), &[0.9, 0.0]);

        let ten = htqaoa_interpolate(&one, 10).unwrap();
        for l in 1..10 {
            assert!(ten.gamma()[l] >= ten.gamma()[l - 1]);
            assert!(ten.beta()[l] <= ten.beta()[l - 1]);
        }
        assert!((ten.gamma()[9] - std::f64::consts::PI).abs() < 1e-15);
        assert!(ten.beta()[9].abs() < 1e-15);

        assert!(htqaoa_interpolate(&one, 1).is_err());
        let deep = ParameterVector::new(vec![0.1; 2], None, vec![0.2; 2]).unwrap();
        assert!(htqaoa_interpolate(&deep, 5).is_err());
    }

    #[test]
    fn standard_strategy_is_reproducible_and_self_consistent() {
        let instance = builtin_test_set(4).unwrap();
        let cfg = config(2, ZetaMode::Independent);
        let run = |seed: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            strategy_standard(&instance, &cfg, &quick_options(seed), &mut rng).unwrap()
        };
        let a = run(9);
        let b = run(9);
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.e_norm, b.e_norm);
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.seed, 9);
        assert_eq!(a.depth_trace.len(), 1);

        // raw_energy re-evaluates to the same objective value.
        let re = objective(&a.best_params, &instance, &cfg, Estimator::Exact).unwrap();
        assert!((re - a.e_norm).abs() < 1e-12);
        assert!(
            (a.raw_energy - (a.e_norm * 18.0 - 3.0)).abs() < 1e-9,
            "bounds arithmetic"
        );
    }

    #[test]
    fn tqaoa_traces_every_depth_and_degenerates_to_standard() {
        let instance = builtin_test_set(4).unwrap();
        let cfg = config(3, ZetaMode::Shared);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let r = strategy_tqaoa(&instance, &cfg, &quick_options(21), &mut rng).unwrap();
        assert_eq!(r.depth_trace.len(), 3);
        assert_eq!(r.best_params.depth(), 3);

        let shallow = config(1, ZetaMode::Shared);
        let mut r1 = ChaCha20Rng::seed_from_u64(33);
        let mut r2 = ChaCha20Rng::seed_from_u64(33);
        let t = strategy_tqaoa(&instance, &shallow, &quick_options(33), &mut r1).unwrap();
        let s = strategy_standard(&instance, &shallow, &quick_options(33), &mut r2).unwrap();
        assert_eq!(t.best_params, s.best_params);
        assert_eq!(t.e_norm, s.e_norm);
    }

    #[test]
    fn htqaoa_requires_depth_two_and_reports_two_stages() {
        let instance = builtin_test_set(4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!(strategy_htqaoa(
            &instance,
            &config(1, ZetaMode::Independent),
            &quick_options(2),
            &mut rng
        )
        .is_err());
        let r = strategy_htqaoa(
            &instance,
            &config(3, ZetaMode::Independent),
            &quick_options(2),
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.depth_trace.len(), 2);
        assert_eq!(r.best_params.depth(), 3);
    }

    #[test]
    fn ancilla_scoring_matches_ground_truth_on_the_classical_variant() {
        // Classical ancillas sit exactly on the ground-truth bits, so both
        // scoring tables see the same support.
        let instance = builtin_test_set(1).unwrap();
        let cfg = config(2, ZetaMode::Independent);
        let truth = ProblemContext::new(&instance, &cfg, ScoreMode::GroundTruth).unwrap();
        let ancilla = ProblemContext::new(&instance, &cfg, ScoreMode::FromAncilla).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..5 {
            let params = init_random_params(2, ZetaMode::Independent, &mut rng);
            let state = truth.evolve(&params).unwrap();
            let a = truth.raw_energy_exact(&state);
            let b = ancilla.raw_energy_exact(&state);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let bad = OptimizerOptions {
            max_evaluations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let inverted = OptimizerOptions {
            initial_step: 1e-4,
            final_step: 1e-3,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
        let instance = builtin_test_set(4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(strategy_standard(
            &instance,
            &config(1, ZetaMode::Shared),
            &inverted,
            &mut rng
        )
        .is_err());
    }
}
