//! Penalty QUBO for interval scheduling, its Ising (spin) form, and the
//! split into the assignment Hamiltonian `H_p` and the ancilla-gated
//! conflict Hamiltonian `H_c`.
//!
//! The objective rewards scheduling every task once and charges `P` for each
//! task assigned to no/multiple resources and for each overlapping pair
//! sharing a resource:
//!
//! ```text
//! Q(x) = -Σ_ij x_ij + Σ_i P (Σ_j x_ij - 1)² + Σ_{i<k, j} P c_ik x_ij x_kj
//! ```
//!
//! Binary variables map to qubits task-major: `qubit(i, j) = i·J + j`.

use std::collections::BTreeMap;

use crate::model::{overlap_matrix, OverlapMatrix, SchedulingInstance};
use crate::{Error, Result};

/// Largest variable count accepted by exhaustive enumeration helpers.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Task-major variable index of assignment `x_ij`.
pub fn qubit_index(task: usize, resource: usize, n_resources: usize) -> usize {
    task * n_resources + resource
}

/// Penalty factor `P = I·J + 1`.
pub fn penalty_factor(instance: &SchedulingInstance) -> f64 {
    (instance.n_tasks() * instance.resources()) as f64 + 1.0
}

/// Quadratic polynomial over binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    n_vars: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    constant: f64,
}

impl QuboModel {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            linear: vec![0.0; n_vars],
            quadratic: BTreeMap::new(),
            constant: 0.0,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Quadratic coefficients keyed by `(a, b)` with `a < b`.
    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn add_linear(&mut self, var: usize, coeff: f64) {
        self.linear[var] += coeff;
    }

    pub fn add_quadratic(&mut self, a: usize, b: usize, coeff: f64) {
        assert_ne!(a, b, "quadratic terms need distinct variables");
        let key = if a < b { (a, b) } else { (b, a) };
        *self.quadratic.entry(key).or_insert(0.0) += coeff;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn evaluate(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.n_vars {
            return Err(Error::DimensionMismatch(format!(
                "assignment has {} bits, model has {} variables",
                bits.len(),
                self.n_vars
            )));
        }
        let mut e = self.constant;
        for (v, &coeff) in self.linear.iter().enumerate() {
            if bits[v] != 0 {
                e += coeff;
            }
        }
        for (&(a, b), &coeff) in &self.quadratic {
            if bits[a] != 0 && bits[b] != 0 {
                e += coeff;
            }
        }
        Ok(e)
    }

    /// Energy for every bitstring, indexed with variable 0 as the least
    /// significant bit.
    pub fn energy_table(&self) -> Result<Vec<f64>> {
        if self.n_vars > BRUTE_FORCE_LIMIT {
            return Err(Error::Unsupported(format!(
                "enumeration over {} variables exceeds the {BRUTE_FORCE_LIMIT}-variable guard",
                self.n_vars
            )));
        }
        let mut table = Vec::with_capacity(1 << self.n_vars);
        let mut bits = vec![0u8; self.n_vars];
        for z in 0u64..(1 << self.n_vars) {
            for (v, bit) in bits.iter_mut().enumerate() {
                *bit = ((z >> v) & 1) as u8;
            }
            table.push(self.evaluate(&bits)?);
        }
        Ok(table)
    }

    /// One term per line: `indices coefficient` with 17 significant digits.
    pub fn dump_coefficients(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("constant {:.16e}\n", self.constant));
        for (v, &c) in self.linear.iter().enumerate() {
            out.push_str(&format!("linear {v} {c:.16e}\n"));
        }
        for (&(a, b), &c) in &self.quadratic {
            out.push_str(&format!("quadratic {a} {b} {c:.16e}\n"));
        }
        out
    }
}

/// Spin (±1) polynomial: `Σ J_nn s_n + Σ J_nm s_n s_m + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n_spins: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    constant: f64,
}

impl IsingModel {
    pub fn new(n_spins: usize) -> Self {
        Self {
            n_spins,
            linear: vec![0.0; n_spins],
            quadratic: BTreeMap::new(),
            constant: 0.0,
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn add_linear(&mut self, spin: usize, coeff: f64) {
        self.linear[spin] += coeff;
    }

    pub fn add_quadratic(&mut self, n: usize, m: usize, coeff: f64) {
        assert_ne!(n, m, "quadratic terms need distinct spins");
        let key = if n < m { (n, m) } else { (m, n) };
        *self.quadratic.entry(key).or_insert(0.0) += coeff;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn evaluate_spins(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n_spins {
            return Err(Error::DimensionMismatch(format!(
                "spin vector has {} entries, model has {} spins",
                spins.len(),
                self.n_spins
            )));
        }
        let mut e = self.constant;
        for (n, &coeff) in self.linear.iter().enumerate() {
            e += coeff * spins[n] as f64;
        }
        for (&(n, m), &coeff) in &self.quadratic {
            e += coeff * (spins[n] as f64) * (spins[m] as f64);
        }
        Ok(e)
    }

    /// Evaluates at the spin image `s = 1 - 2x` of a bit vector.
    pub fn evaluate_bits(&self, bits: &[u8]) -> Result<f64> {
        let spins: Vec<i8> = bits.iter().map(|&b| 1 - 2 * b as i8).collect();
        self.evaluate_spins(&spins)
    }

    pub fn dump_coefficients(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("constant {:.16e}\n", self.constant));
        for (n, &c) in self.linear.iter().enumerate() {
            out.push_str(&format!("z {n} {c:.16e}\n"));
        }
        for (&(n, m), &c) in &self.quadratic {
            out.push_str(&format!("zz {n} {m} {c:.16e}\n"));
        }
        out
    }
}

/// One conflict penalty term: pair `(i, k)` on resource `j`, with spin-form
/// coefficients `+P/4` on `s_ij s_kj`, `-P/4` on each of `s_ij`, `s_kj`, and
/// a `+P/4` constant. `active` carries the ground-truth coefficient `c_ik`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HcTerm {
    pub i: usize,
    pub k: usize,
    pub j: usize,
    pub active: bool,
}

/// All conflict terms of an instance, one per (pair, resource).
#[derive(Debug, Clone, PartialEq)]
pub struct HcTermSet {
    terms: Vec<HcTerm>,
    penalty: f64,
    n_resources: usize,
}

impl HcTermSet {
    pub fn terms(&self) -> &[HcTerm] {
        &self.terms
    }

    pub fn active_terms(&self) -> impl Iterator<Item = &HcTerm> {
        self.terms.iter().filter(|t| t.active)
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn n_resources(&self) -> usize {
        self.n_resources
    }

    /// Copy with the knowably inactive terms dropped.
    pub fn pruned(&self) -> Self {
        Self {
            terms: self.terms.iter().copied().filter(|t| t.active).collect(),
            penalty: self.penalty,
            n_resources: self.n_resources,
        }
    }

    /// Coefficient of `s_ij s_kj` in every term.
    pub fn zz_coeff(&self) -> f64 {
        self.penalty / 4.0
    }

    /// Coefficient of each single-spin factor in every term.
    pub fn z_coeff(&self) -> f64 {
        -self.penalty / 4.0
    }

    /// Constant contributed by every term.
    pub fn constant_per_term(&self) -> f64 {
        self.penalty / 4.0
    }

    /// Spin-form value of one term: `(P/4)(1 - s_ij - s_kj + s_ij s_kj)`.
    pub fn term_value(&self, s_ij: i8, s_kj: i8) -> f64 {
        self.penalty / 4.0
            * (1.0 - s_ij as f64 - s_kj as f64 + (s_ij as f64) * (s_kj as f64))
    }

    /// Sum of the active terms at the spin image of `bits`.
    pub fn evaluate_bits(&self, bits: &[u8]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.active)
            .map(|t| {
                let s_ij = 1 - 2 * bits[qubit_index(t.i, t.j, self.n_resources)] as i8;
                let s_kj = 1 - 2 * bits[qubit_index(t.k, t.j, self.n_resources)] as i8;
                self.term_value(s_ij, s_kj)
            })
            .sum()
    }
}

/// QUBO for the objective and the exactly-once assignment penalty, without
/// conflict terms.
pub fn build_hp_qubo(instance: &SchedulingInstance) -> QuboModel {
    let (i_count, j_count) = (instance.n_tasks(), instance.resources());
    let p = instance.penalty();
    let mut q = QuboModel::new(instance.n_vars());
    for i in 0..i_count {
        for j in 0..j_count {
            // -x_ij from the objective plus P(Σ_j x_ij - 1)² expanded.
            q.add_linear(qubit_index(i, j, j_count), -1.0 - p);
            for j2 in j + 1..j_count {
                q.add_quadratic(
                    qubit_index(i, j, j_count),
                    qubit_index(i, j2, j_count),
                    2.0 * p,
                );
            }
        }
        q.add_constant(p);
    }
    q
}

/// Full scheduling QUBO: assignment part plus `P·c_ik` on each same-resource
/// product of an overlapping pair (the squared conflict product collapses by
/// idempotence).
pub fn build_qubo(instance: &SchedulingInstance, overlaps: &OverlapMatrix) -> QuboModel {
    let j_count = instance.resources();
    let p = instance.penalty();
    let mut q = build_hp_qubo(instance);
    for (i, k, c) in overlaps.pairs() {
        if c {
            for j in 0..j_count {
                q.add_quadratic(
                    qubit_index(i, j, j_count),
                    qubit_index(k, j, j_count),
                    p,
                );
            }
        }
    }
    q
}

/// Exact Ising image of a QUBO under `x = (1 - s)/2`.
pub fn qubo_to_ising(qubo: &QuboModel) -> IsingModel {
    let n = qubo.n_vars();
    let mut linear = vec![0.0; n];
    let mut quadratic: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut constant = qubo.constant();
    for (v, &l) in qubo.linear().iter().enumerate() {
        constant += l / 2.0;
        linear[v] -= l / 2.0;
    }
    for (&(a, b), &q) in qubo.quadratic() {
        constant += q / 4.0;
        linear[a] -= q / 4.0;
        linear[b] -= q / 4.0;
        *quadratic.entry((a, b)).or_insert(0.0) += q / 4.0;
    }
    IsingModel {
        n_spins: n,
        linear,
        quadratic,
        constant,
    }
}

/// Splits the problem Hamiltonian: the `H_p` Ising model (objective +
/// assignment penalty) and the conflict term set `H_c`. Summing the pair at
/// the spin image of any bitstring reproduces the full QUBO.
pub fn split_hamiltonian(
    instance: &SchedulingInstance,
    overlaps: &OverlapMatrix,
) -> (IsingModel, HcTermSet) {
    let hp = qubo_to_ising(&build_hp_qubo(instance));
    let mut terms = Vec::new();
    for (i, k, c) in overlaps.pairs() {
        for j in 0..instance.resources() {
            terms.push(HcTerm {
                i,
                k,
                j,
                active: c,
            });
        }
    }
    let hc = HcTermSet {
        terms,
        penalty: instance.penalty(),
        n_resources: instance.resources(),
    };
    (hp, hc)
}

/// Normalization bounds: the penalty-free ideal `e_min = -I` (every task
/// scheduled once, no conflicts charged) and `e_max` = QUBO at all-ones.
///
/// `e_min` is the normalization floor even when no conflict-free schedule
/// exists (then the true minimum is higher and normalized energy cannot
/// reach 0); [`brute_force_minimum`] reports the attainable value.
pub fn energy_bounds(instance: &SchedulingInstance, overlaps: &OverlapMatrix) -> (f64, f64) {
    let qubo = build_qubo(instance, overlaps);
    let all_ones = vec![1u8; qubo.n_vars()];
    let e_max = qubo
        .evaluate(&all_ones)
        .expect("all-ones evaluation cannot fail");
    (-(instance.n_tasks() as f64), e_max)
}

/// Exhaustive minimum over all assignments; ties break toward the lowest
/// bitstring value (variable 0 = least significant bit).
pub fn brute_force_minimum(qubo: &QuboModel) -> Result<(Vec<u8>, f64)> {
    let table = qubo.energy_table()?;
    let (mut best_z, mut best_e) = (0usize, table[0]);
    for (z, &e) in table.iter().enumerate().skip(1) {
        if e < best_e {
            best_e = e;
            best_z = z;
        }
    }
    let bits: Vec<u8> = (0..qubo.n_vars())
        .map(|v| ((best_z >> v) & 1) as u8)
        .collect();
    Ok((bits, best_e))
}

/// Convenience: full QUBO of an instance with ground-truth overlaps.
pub fn instance_qubo(instance: &SchedulingInstance) -> QuboModel {
    build_qubo(instance, &overlap_matrix(instance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_test_set;
    use proptest::prelude::*;

    fn bits_of(z: u64, n: usize) -> Vec<u8> {
        (0..n).map(|v| ((z >> v) & 1) as u8).collect()
    }

    /// Assignment bitstring scheduling each task on the given resource.
    fn schedule_bits(resources: &[usize], j_count: usize) -> Vec<u8> {
        let mut bits = vec![0u8; resources.len() * j_count];
        for (i, &j) in resources.iter().enumerate() {
            bits[qubit_index(i, j, j_count)] = 1;
        }
        bits
    }

    #[test]
    fn penalty_factor_formula() {
        assert_eq!(penalty_factor(&builtin_test_set(1).unwrap()), 7.0);
        let one = SchedulingInstance::new(
            vec![crate::model::TaskInterval::new(0.0, 1.0).unwrap()],
            1,
        )
        .unwrap();
        assert_eq!(penalty_factor(&one), 2.0);
    }

    #[test]
    fn published_energy_bounds_for_all_sets() {
        let expected_max = [29.0, 57.0, 43.0, 15.0, 29.0, 43.0];
        for id in 1..=6 {
            let instance = builtin_test_set(id).unwrap();
            let overlaps = overlap_matrix(&instance);
            let (e_min, e_max) = energy_bounds(&instance, &overlaps);
            assert_eq!(e_min, -3.0, "set {id}");
            assert_eq!(e_max, expected_max[id - 1], "set {id}");
        }
    }

    #[test]
    fn hand_evaluated_energies() {
        let set4 = builtin_test_set(4).unwrap();
        let q4 = instance_qubo(&set4);
        assert_eq!(q4.evaluate(&[1; 6]).unwrap(), 15.0);
        assert_eq!(q4.evaluate(&[0; 6]).unwrap(), 21.0);
        assert_eq!(q4.evaluate(&schedule_bits(&[0, 0, 0], 2)).unwrap(), -3.0);
        assert_eq!(q4.evaluate(&schedule_bits(&[0, 1, 0], 2)).unwrap(), -3.0);

        let set1 = builtin_test_set(1).unwrap();
        assert_eq!(instance_qubo(&set1).evaluate(&[1; 6]).unwrap(), 29.0);

        // Tasks 0 and 1 share resource 0 while all three pairs overlap: one
        // conflict charge on top of a full schedule.
        let set2 = builtin_test_set(2).unwrap();
        let q2 = instance_qubo(&set2);
        assert_eq!(q2.evaluate(&schedule_bits(&[0, 0, 1], 2)).unwrap(), 4.0);
    }

    #[test]
    fn brute_force_minima_for_all_sets() {
        let expected = [-3.0, 4.0, -3.0, -3.0, -3.0, -3.0];
        for id in 1..=6 {
            let qubo = instance_qubo(&builtin_test_set(id).unwrap());
            let (bits, e) = brute_force_minimum(&qubo).unwrap();
            assert_eq!(e, expected[id - 1], "set {id}");
            assert_eq!(qubo.evaluate(&bits).unwrap(), e, "set {id}");
        }
    }

    #[test]
    fn brute_force_guard_rejects_large_models() {
        let q = QuboModel::new(BRUTE_FORCE_LIMIT + 1);
        assert!(brute_force_minimum(&q).is_err());
    }

    #[test]
    fn single_variable_ising_transform() {
        let mut q = QuboModel::new(1);
        q.add_linear(0, 1.0);
        let ising = qubo_to_ising(&q);
        assert_eq!(ising.linear(), &[-0.5]);
        assert_eq!(ising.constant(), 0.5);
        assert!(ising.quadratic().is_empty());
    }

    #[test]
    fn product_term_ising_transform() {
        let mut q = QuboModel::new(2);
        q.add_quadratic(0, 1, 1.0);
        let ising = qubo_to_ising(&q);
        assert_eq!(ising.linear(), &[-0.25, -0.25]);
        assert_eq!(ising.quadratic()[&(0, 1)], 0.25);
        assert_eq!(ising.constant(), 0.25);
    }

    #[test]
    fn ising_matches_qubo_on_all_bitstrings_of_every_set() {
        for id in 1..=6 {
            let qubo = instance_qubo(&builtin_test_set(id).unwrap());
            let ising = qubo_to_ising(&qubo);
            for z in 0u64..64 {
                let bits = bits_of(z, 6);
                let dq = qubo.evaluate(&bits).unwrap();
                let di = ising.evaluate_bits(&bits).unwrap();
                assert!((dq - di).abs() < 1e-9, "set {id}, z={z}: {dq} vs {di}");
            }
        }
    }

    #[test]
    fn split_sum_reproduces_full_qubo() {
        for id in 1..=6 {
            let instance = builtin_test_set(id).unwrap();
            let overlaps = overlap_matrix(&instance);
            let qubo = build_qubo(&instance, &overlaps);
            let (hp, hc) = split_hamiltonian(&instance, &overlaps);
            for z in 0u64..64 {
                let bits = bits_of(z, 6);
                let full = qubo.evaluate(&bits).unwrap();
                let split = hp.evaluate_bits(&bits).unwrap() + hc.evaluate_bits(&bits);
                assert!(
                    (full - split).abs() < 1e-9,
                    "set {id}, z={z}: {full} vs {split}"
                );
            }
        }
    }

    #[test]
    fn conflict_term_values_are_zero_or_penalty() {
        let instance = builtin_test_set(1).unwrap();
        let (_, hc) = split_hamiltonian(&instance, &overlap_matrix(&instance));
        let p = instance.penalty();
        // Both scheduled (s = -1): full charge; otherwise nothing.
        assert_eq!(hc.term_value(-1, -1), p);
        assert_eq!(hc.term_value(1, 1), 0.0);
        assert_eq!(hc.term_value(1, -1), 0.0);
        assert_eq!(hc.term_value(-1, 1), 0.0);
    }

    #[test]
    fn conflict_terms_cover_every_pair_and_resource() {
        let instance = builtin_test_set(4).unwrap();
        let (_, hc) = split_hamiltonian(&instance, &overlap_matrix(&instance));
        assert_eq!(hc.terms().len(), 6);
        assert!(hc.active_terms().next().is_none());

        let set2 = builtin_test_set(2).unwrap();
        let (_, hc2) = split_hamiltonian(&set2, &overlap_matrix(&set2));
        assert_eq!(hc2.active_terms().count(), 6);
        assert_eq!(hc2.zz_coeff(), 7.0 / 4.0);
        assert_eq!(hc2.z_coeff(), -7.0 / 4.0);
        assert_eq!(hc2.constant_per_term(), 7.0 / 4.0);
    }

    #[test]
    fn brute_force_never_beats_ideal_and_matches_feasibility() {
        for id in 1..=6 {
            let instance = builtin_test_set(id).unwrap();
            let overlaps = overlap_matrix(&instance);
            let (e_min_ideal, _) = energy_bounds(&instance, &overlaps);
            let (bits, e) = brute_force_minimum(&build_qubo(&instance, &overlaps)).unwrap();
            assert!(e >= e_min_ideal - 1e-12, "set {id}");
            if e == e_min_ideal {
                // A conflict-free full schedule: exactly one resource per task.
                for i in 0..instance.n_tasks() {
                    let assigned: u8 = (0..instance.resources())
                        .map(|j| bits[qubit_index(i, j, instance.resources())])
                        .sum();
                    assert_eq!(assigned, 1, "set {id}, task {i}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ising_equivalence_on_random_instances(
            raw in proptest::collection::vec((0.0f64..10.0, 0.1f64..4.0), 1..5),
            j_count in 1usize..3,
        ) {
            let tasks: Vec<_> = raw.iter()
                .map(|&(s, d)| crate::model::TaskInterval::new(s, s + d).unwrap())
                .collect();
            let instance = SchedulingInstance::new(tasks, j_count).unwrap();
            let overlaps = overlap_matrix(&instance);
            let qubo = build_qubo(&instance, &overlaps);
            let ising = qubo_to_ising(&qubo);
            let (hp, hc) = split_hamiltonian(&instance, &overlaps);
            let n = qubo.n_vars();
            for z in 0u64..(1 << n) {
                let bits = bits_of(z, n);
                let e = qubo.evaluate(&bits).unwrap();
                prop_assert!((e - ising.evaluate_bits(&bits).unwrap()).abs() < 1e-9);
                prop_assert!((e - hp.evaluate_bits(&bits).unwrap() - hc.evaluate_bits(&bits)).abs() < 1e-9);
            }
        }
    }
}
