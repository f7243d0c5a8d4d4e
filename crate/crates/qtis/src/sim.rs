//! Dense statevector simulator with exactly the gate set the scheduling
//! circuits need, plus sampling and exact energy expectations.
//!
//! Conventions: qubit 0 is the least significant bit of a basis index, and
//! bitstrings render most significant qubit first (so `|101⟩` is index 5).
//! `RY(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`,
//! `RZ(θ) = diag(e^{-iθ/2}, e^{+iθ/2})`, and `RZZ(θ)` phases even-parity
//! basis states by `e^{-iθ/2}` and odd-parity ones by `e^{+iθ/2}`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::qubo::QuboModel;
use crate::{Error, Result};

/// Complex amplitudes of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0⟩`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[0] = Complex64::ONE;
        Self { n_qubits, amps }
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= (1 << n_qubits) {
            return Err(Error::DimensionMismatch(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[index] = Complex64::ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Replaces the amplitudes; the vector length must stay `2^n`.
    pub fn set_amplitudes(&mut self, amps: Vec<Complex64>) {
        assert_eq!(amps.len(), 1 << self.n_qubits, "amplitude count");
        self.amps = amps;
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn probability_of_one(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(z, _)| z & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Probability of each outcome over the given qubits (bit `j` of the
    /// outcome index reads qubit `qubits[j]`).
    pub fn marginal_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        let mut out = vec![0.0; 1 << qubits.len()];
        for (z, a) in self.amps.iter().enumerate() {
            let mut idx = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                idx |= ((z >> q) & 1) << j;
            }
            out[idx] += a.norm_sqr();
        }
        Ok(out)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        let inner: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        inner.norm_sqr()
    }
}

/// Renders a basis index as a bitstring, most significant qubit first.
pub fn bitstring(index: u64, n_qubits: usize) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// The gate set of the scheduling circuits. Controlled variants act only on
/// basis states whose control bits are all 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H { q: usize },
    Rx { q: usize, theta: f64 },
    Ry { q: usize, theta: f64 },
    Rz { q: usize, theta: f64 },
    Rzz { a: usize, b: usize, theta: f64 },
    Swap { a: usize, b: usize },
    Ccnot { c0: usize, c1: usize, target: usize },
    Crz { control: usize, q: usize, theta: f64 },
    Crzz { control: usize, a: usize, b: usize, theta: f64 },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H { .. } => "H",
            Gate::Rx { .. } => "RX",
            Gate::Ry { .. } => "RY",
            Gate::Rz { .. } => "RZ",
            Gate::Rzz { .. } => "RZZ",
            Gate::Swap { .. } => "SWAP",
            Gate::Ccnot { .. } => "CCNOT",
            Gate::Crz { .. } => "CRZ",
            Gate::Crzz { .. } => "CRZZ",
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            Gate::Rx { theta, .. }
            | Gate::Ry { theta, .. }
            | Gate::Rz { theta, .. }
            | Gate::Rzz { theta, .. }
            | Gate::Crz { theta, .. }
            | Gate::Crzz { theta, .. } => Some(*theta),
            _ => None,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::H { q } | Gate::Rx { q, .. } | Gate::Ry { q, .. } | Gate::Rz { q, .. } => {
                vec![q]
            }
            Gate::Rzz { a, b, .. } | Gate::Swap { a, b } => vec![a, b],
            Gate::Ccnot { target, .. } => vec![target],
            Gate::Crz { q, .. } => vec![q],
            Gate::Crzz { a, b, .. } => vec![a, b],
        }
    }

    pub fn controls(&self) -> Vec<usize> {
        match *self {
            Gate::Ccnot { c0, c1, .. } => vec![c0, c1],
            Gate::Crz { control, .. } | Gate::Crzz { control, .. } => vec![control],
            _ => vec![],
        }
    }

    /// Inverse gate: negated angle, or the gate itself when self-inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx { q, theta } => Gate::Rx { q, theta: -theta },
            Gate::Ry { q, theta } => Gate::Ry { q, theta: -theta },
            Gate::Rz { q, theta } => Gate::Rz { q, theta: -theta },
            Gate::Rzz { a, b, theta } => Gate::Rzz { a, b, theta: -theta },
            Gate::Crz { control, q, theta } => Gate::Crz {
                control,
                q,
                theta: -theta,
            },
            Gate::Crzz {
                control,
                a,
                b,
                theta,
            } => Gate::Crzz {
                control,
                a,
                b,
                theta: -theta,
            },
            g => g,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let mut seen = Vec::new();
        for q in self.targets().into_iter().chain(self.controls()) {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    n_qubits,
                });
            }
            if seen.contains(&q) {
                return Err(Error::DimensionMismatch(format!(
                    "gate {} uses qubit {q} twice",
                    self.name()
                )));
            }
            seen.push(q);
        }
        if let Some(theta) = self.theta() {
            if !theta.is_finite() {
                return Err(Error::DimensionMismatch(format!(
                    "gate {} has non-finite angle",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// One-line text form: `GATE q_targets [q_controls] theta=<17 sig digits>`.
    pub fn dump_line(&self) -> String {
        let mut line = self.name().to_string();
        line.push(' ');
        line.push_str(
            &self
                .targets()
                .iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        let controls = self.controls();
        if !controls.is_empty() {
            line.push_str(" [");
            line.push_str(
                &controls
                    .iter()
                    .map(|q| q.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            line.push(']');
        }
        if let Some(theta) = self.theta() {
            line.push_str(&format!(" theta={theta:.16e}"));
        }
        line
    }
}

/// An ordered gate sequence over a fixed-width register, with the set of
/// qubits read out at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    measured: BTreeSet<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            measured: BTreeSet::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn mark_measured(&mut self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        self.measured.insert(qubit);
        Ok(())
    }

    pub fn measured(&self) -> impl Iterator<Item = usize> + '_ {
        self.measured.iter().copied()
    }

    /// Text dump, one gate per line (see [`Gate::dump_line`]).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(&g.dump_line());
            out.push('\n');
        }
        out
    }
}

fn phase(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

fn apply_single_qubit(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let stride = 1usize << q;
    let mut base = 0usize;
    while base < amps.len() {
        for i0 in base..base + stride {
            let i1 = i0 + stride;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += stride << 1;
    }
}

/// Applies one gate in place.
pub fn apply_gate(state: &mut StateVector, gate: &Gate) -> Result<()> {
    gate.validate(state.n_qubits)?;
    let amps = &mut state.amps;
    match *gate {
        Gate::H { q } => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            apply_single_qubit(amps, q, [[h, h], [h, -h]]);
        }
        Gate::Rx { q, theta } => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let s = Complex64::new(0.0, -(theta / 2.0).sin());
            apply_single_qubit(amps, q, [[c, s], [s, c]]);
        }
        Gate::Ry { q, theta } => {
            let c = Complex64::new((theta / 2.0).cos(), 0.0);
            let s = Complex64::new((theta / 2.0).sin(), 0.0);
            apply_single_qubit(amps, q, [[c, -s], [s, c]]);
        }
        Gate::Rz { q, theta } => {
            let p0 = phase(-theta / 2.0);
            let p1 = phase(theta / 2.0);
            let mask = 1usize << q;
            for (z, a) in amps.iter_mut().enumerate() {
                *a *= if z & mask == 0 { p0 } else { p1 };
            }
        }
        Gate::Rzz { a, b, theta } => {
            let even = phase(-theta / 2.0);
            let odd = phase(theta / 2.0);
            let (ma, mb) = (1usize << a, 1usize << b);
            for (z, amp) in amps.iter_mut().enumerate() {
                *amp *= if (z & ma == 0) == (z & mb == 0) { even } else { odd };
            }
        }
        Gate::Swap { a, b } => {
            let (ma, mb) = (1usize << a, 1usize << b);
            for z in 0..amps.len() {
                if z & ma != 0 && z & mb == 0 {
                    amps.swap(z, z ^ ma ^ mb);
                }
            }
        }
        Gate::Ccnot { c0, c1, target } => {
            let (m0, m1, mt) = (1usize << c0, 1usize << c1, 1usize << target);
            for z in 0..amps.len() {
                if z & m0 != 0 && z & m1 != 0 && z & mt == 0 {
                    amps.swap(z, z | mt);
                }
            }
        }
        Gate::Crz { control, q, theta } => {
            let p0 = phase(-theta / 2.0);
            let p1 = phase(theta / 2.0);
            let (mc, mq) = (1usize << control, 1usize << q);
            for (z, a) in amps.iter_mut().enumerate() {
                if z & mc != 0 {
                    *a *= if z & mq == 0 { p0 } else { p1 };
                }
            }
        }
        Gate::Crzz {
            control,
            a,
            b,
            theta,
        } => {
            let even = phase(-theta / 2.0);
            let odd = phase(theta / 2.0);
            let (mc, ma, mb) = (1usize << control, 1usize << a, 1usize << b);
            for (z, amp) in amps.iter_mut().enumerate() {
                if z & mc != 0 {
                    *amp *= if (z & ma == 0) == (z & mb == 0) { even } else { odd };
                }
            }
        }
    }
    Ok(())
}

/// Runs the gate sequence over a copy of `initial`.
pub fn run_circuit(circuit: &Circuit, initial: &StateVector) -> Result<StateVector> {
    if initial.n_qubits != circuit.n_qubits {
        return Err(Error::DimensionMismatch(format!(
            "state has {} qubits, circuit has {}",
            initial.n_qubits, circuit.n_qubits
        )));
    }
    let mut state = initial.clone();
    for gate in &circuit.gates {
        apply_gate(&mut state, gate)?;
    }
    Ok(state)
}

/// Measurement outcomes of a multinomial draw from `|amplitude|²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<u64, u64>,
}

impl SampleCounts {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Counts keyed by basis index, ascending.
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    /// Counts keyed by rendered bitstring (most significant qubit first).
    pub fn rendered(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&z, &c)| (bitstring(z, self.n_qubits), c))
            .collect()
    }

    /// Most frequent outcome; ties break toward the lowest basis index.
    pub fn modal(&self) -> Option<(u64, u64)> {
        self.counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&z, &c)| (z, c))
    }

    /// Restriction to the given qubits (bit `j` of a new key reads old
    /// qubit `qubits[j]`).
    pub fn marginal(&self, qubits: &[usize]) -> SampleCounts {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for (&z, &c) in &self.counts {
            let mut idx = 0u64;
            for (j, &q) in qubits.iter().enumerate() {
                idx |= ((z >> q) & 1) << j;
            }
            *counts.entry(idx).or_insert(0) += c;
        }
        SampleCounts {
            n_qubits: qubits.len(),
            shots: self.shots,
            counts,
        }
    }
}

/// Draws `shots` outcomes from the state's measurement distribution;
/// reproducible for a fixed seed.
pub fn sample(state: &StateVector, shots: u64, rng_seed: u64) -> SampleCounts {
    let probs = state.probabilities();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= u).min(probs.len() - 1);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    SampleCounts {
        n_qubits: state.n_qubits,
        shots,
        counts,
    }
}

/// Exact energy expectation: `Σ_z |⟨z|ψ⟩|² · Q(z restricted to problem
/// qubits)`, marginalizing over everything else.
pub fn expectation_energy(
    state: &StateVector,
    qubo: &QuboModel,
    problem_qubits: &[usize],
) -> Result<f64> {
    if problem_qubits.len() != qubo.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "{} problem qubits for a {}-variable model",
            problem_qubits.len(),
            qubo.n_vars()
        )));
    }
    let table = qubo.energy_table()?;
    let marginal = state.marginal_probabilities(problem_qubits)?;
    Ok(marginal
        .iter()
        .zip(&table)
        .map(|(p, e)| p * e)
        .sum())
}
