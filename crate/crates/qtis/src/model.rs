//! Scheduling instances, the six built-in benchmark interval sets, and the
//! classical overlap ground truth used for scoring and verification.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A task occupying one resource for its whole time window.
///
/// Overlap uses strict inequalities, so intervals that merely touch
/// (`a.end == b.start`) do not conflict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskInterval {
    pub start: f64,
    pub end: f64,
}

impl TaskInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "interval [{start}, {end}] has a non-finite endpoint"
            )));
        }
        if end <= start {
            return Err(Error::InvalidInstance(format!(
                "interval [{start}, {end}] must satisfy end > start"
            )));
        }
        Ok(Self { start, end })
    }

    /// Strict-overlap test: `t_e^i > t_s^k` and `t_e^k > t_s^i`.
    pub fn overlaps(&self, other: &TaskInterval) -> bool {
        self.end > other.start && other.end > self.start
    }
}

/// An interval scheduling problem: `I` tasks, `J` identical resources, and
/// the penalty factor `P` weighting constraint violations.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingInstance {
    tasks: Vec<TaskInterval>,
    resources: usize,
    penalty: f64,
}

impl SchedulingInstance {
    /// Builds an instance with the default penalty `P = I·J + 1`.
    pub fn new(tasks: Vec<TaskInterval>, resources: usize) -> Result<Self> {
        let penalty = (tasks.len() * resources) as f64 + 1.0;
        Self::with_penalty(tasks, resources, penalty)
    }

    pub fn with_penalty(tasks: Vec<TaskInterval>, resources: usize, penalty: f64) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidInstance("at least one task required".into()));
        }
        if resources < 1 {
            return Err(Error::InvalidInstance(
                "at least one resource required".into(),
            ));
        }
        if !penalty.is_finite() || penalty <= 0.0 {
            return Err(Error::InvalidInstance(format!(
                "penalty must be positive and finite, got {penalty}"
            )));
        }
        Ok(Self {
            tasks,
            resources,
            penalty,
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn tasks(&self) -> &[TaskInterval] {
        &self.tasks
    }

    /// Number of binary assignment variables, `I·J`.
    pub fn n_vars(&self) -> usize {
        self.tasks.len() * self.resources
    }

    /// Serializes to the instance document format (see [`load_instance`]).
    pub fn to_document(&self) -> String {
        let doc = InstanceDoc {
            tasks: self.tasks.clone(),
            resources: self.resources,
            penalty: Some(self.penalty),
        };
        serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
    }
}

/// The six built-in benchmark interval sets (`J = 2` resources, `P = 7`).
pub fn builtin_test_set(id: usize) -> Result<SchedulingInstance> {
    let intervals: &[(f64, f64)] = match id {
        1 => &[(1.0, 3.0), (1.5, 4.0), (5.0, 6.0)],
        2 => &[(1.0, 3.0), (1.5, 8.0), (2.0, 6.0)],
        3 => &[(1.0, 3.0), (1.5, 4.0), (3.5, 6.0)],
        4 => &[(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)],
        5 => &[(1.0, 2.0), (3.0, 5.0), (4.0, 6.0)],
        6 => &[(1.0, 5.0), (2.0, 3.0), (4.0, 6.0)],
        _ => return Err(Error::UnknownTestSet(id)),
    };
    let tasks = intervals
        .iter()
        .map(|&(s, e)| TaskInterval::new(s, e))
        .collect::<Result<Vec<_>>>()?;
    SchedulingInstance::new(tasks, 2)
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    tasks: Vec<TaskInterval>,
    resources: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty: Option<f64>,
}

/// Parses an instance document:
/// `{"tasks": [{"start": r, "end": r}, ...], "resources": int, "penalty": optional}`.
///
/// `penalty` defaults to `I·J + 1` when absent.
pub fn load_instance(document: &str) -> Result<SchedulingInstance> {
    let doc: InstanceDoc =
        serde_json::from_str(document).map_err(|e| Error::Document(e.to_string()))?;
    for (idx, t) in doc.tasks.iter().enumerate() {
        TaskInterval::new(t.start, t.end)
            .map_err(|e| Error::Document(format!("tasks[{idx}]: {e}")))?;
    }
    match doc.penalty {
        Some(p) => SchedulingInstance::with_penalty(doc.tasks, doc.resources, p),
        None => SchedulingInstance::new(doc.tasks, doc.resources),
    }
    .map_err(|e| Error::Document(e.to_string()))
}

/// Lexicographic index of the pair `(i, k)`, `i < k`, among all pairs of `n`.
pub fn pair_index(i: usize, k: usize, n: usize) -> usize {
    debug_assert!(i < k && k < n);
    i * n - i * (i + 1) / 2 + (k - i - 1)
}

/// Pairwise overlap coefficients `c_ik` for `i < k`, stored in lexicographic
/// pair order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    n_tasks: usize,
    flags: Vec<bool>,
}

impl OverlapMatrix {
    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn n_pairs(&self) -> usize {
        self.flags.len()
    }

    /// `c_ik` for any `i != k`; order-insensitive.
    pub fn overlaps(&self, i: usize, k: usize) -> bool {
        let (a, b) = if i < k { (i, k) } else { (k, i) };
        self.flags[pair_index(a, b, self.n_tasks)]
    }

    /// Iterates `(i, k, c_ik)` in lexicographic pair order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n_tasks).flat_map(move |i| {
            (i + 1..self.n_tasks).map(move |k| (i, k, self.overlaps(i, k)))
        })
    }

    pub fn count_overlaps(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Ground-truth overlap matrix from the strict-inequality interval test.
pub fn overlap_matrix(instance: &SchedulingInstance) -> OverlapMatrix {
    let n = instance.n_tasks();
    let tasks = instance.tasks();
    let mut flags = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in i + 1..n {
            flags.push(tasks[i].overlaps(&tasks[k]));
        }
    }
    OverlapMatrix { n_tasks: n, flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_flags(m: &OverlapMatrix) -> Vec<bool> {
        m.pairs().map(|(_, _, c)| c).collect()
    }

    #[test]
    fn builtin_sets_match_published_intervals() {
        let set1 = builtin_test_set(1).unwrap();
        assert_eq!(
            set1.tasks(),
            &[
                TaskInterval { start: 1.0, end: 3.0 },
                TaskInterval { start: 1.5, end: 4.0 },
                TaskInterval { start: 5.0, end: 6.0 },
            ]
        );
        assert_eq!(set1.resources(), 2);
        assert_eq!(set1.penalty(), 7.0);

        let set4 = builtin_test_set(4).unwrap();
        assert_eq!(
            set4.tasks(),
            &[
                TaskInterval { start: 1.0, end: 2.0 },
                TaskInterval { start: 3.0, end: 4.0 },
                TaskInterval { start: 5.0, end: 6.0 },
            ]
        );
        assert_eq!(set4.penalty(), 7.0);
    }

    #[test]
    fn unknown_set_is_rejected() {
        assert!(matches!(builtin_test_set(7), Err(Error::UnknownTestSet(7))));
        assert!(matches!(builtin_test_set(0), Err(Error::UnknownTestSet(0))));
    }

    #[test]
    fn overlap_patterns_for_all_builtin_sets() {
        let expected: [(usize, [bool; 3]); 6] = [
            (1, [true, false, false]),
            (2, [true, true, true]),
            (3, [true, false, true]),
            (4, [false, false, false]),
            (5, [false, false, true]),
            (6, [true, true, false]),
        ];
        for (id, flags) in expected {
            let m = overlap_matrix(&builtin_test_set(id).unwrap());
            assert_eq!(pair_flags(&m), flags, "set {id}");
        }
    }

    #[test]
    fn touching_intervals_do_not_overlap() {
        let a = TaskInterval::new(1.0, 2.0).unwrap();
        let b = TaskInterval::new(2.0, 3.0).unwrap();
        assert!(!a.overlaps(&b));
        assert!(!b.overlaps(&a));
    }

    #[test]
    fn default_penalty_follows_problem_size() {
        let one = SchedulingInstance::new(vec![TaskInterval::new(0.0, 1.0).unwrap()], 1).unwrap();
        assert_eq!(one.penalty(), 2.0);
        let eight: Vec<_> = (0..8)
            .map(|i| TaskInterval::new(i as f64, i as f64 + 0.5).unwrap())
            .collect();
        assert_eq!(SchedulingInstance::new(eight, 3).unwrap().penalty(), 25.0);
    }

    #[test]
    fn document_round_trip_is_lossless() {
        for id in 1..=6 {
            let instance = builtin_test_set(id).unwrap();
            let reloaded = load_instance(&instance.to_document()).unwrap();
            assert_eq!(reloaded, instance, "set {id}");
        }
    }

    #[test]
    fn document_defaults_and_errors() {
        let minimal = r#"{"tasks":[{"start":0.0,"end":1.0}],"resources":1}"#;
        assert_eq!(load_instance(minimal).unwrap().penalty(), 2.0);

        let bad_interval = r#"{"tasks":[{"start":2.0,"end":1.0}],"resources":1}"#;
        let err = load_instance(bad_interval).unwrap_err().to_string();
        assert!(err.contains("tasks[0]"), "got: {err}");

        let bad_json = r#"{"tasks": oops}"#;
        assert!(load_instance(bad_json).is_err());

        let no_resources = r#"{"tasks":[{"start":0.0,"end":1.0}],"resources":0}"#;
        assert!(load_instance(no_resources).is_err());
    }

    #[test]
    fn pair_index_is_lexicographic_bijection() {
        let n = 5;
        let mut seen = vec![false; n * (n - 1) / 2];
        let mut expected = 0;
        for i in 0..n {
            for k in i + 1..n {
                let idx = pair_index(i, k, n);
                assert_eq!(idx, expected);
                assert!(!seen[idx]);
                seen[idx] = true;
                expected += 1;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    proptest! {
        #[test]
        fn overlap_invariant_under_translation_and_scaling(
            shift in -50.0f64..50.0,
            scale in 0.1f64..10.0,
            raw in proptest::collection::vec((0.0f64..20.0, 0.1f64..5.0), 2..6),
        ) {
            let tasks: Vec<_> = raw.iter()
                .map(|&(s, d)| TaskInterval::new(s, s + d).unwrap())
                .collect();
            let moved: Vec<_> = raw.iter()
                .map(|&(s, d)| TaskInterval::new(s * scale + shift, (s + d) * scale + shift).unwrap())
                .collect();
            let a = overlap_matrix(&SchedulingInstance::new(tasks, 2).unwrap());
            let b = overlap_matrix(&SchedulingInstance::new(moved, 2).unwrap());
            prop_assert_eq!(pair_flags(&a), pair_flags(&b));
        }

        #[test]
        fn overlap_matrix_is_symmetric(
            raw in proptest::collection::vec((0.0f64..20.0, 0.1f64..5.0), 2..6),
        ) {
            let tasks: Vec<_> = raw.iter()
                .map(|&(s, d)| TaskInterval::new(s, s + d).unwrap())
                .collect();
            let m = overlap_matrix(&SchedulingInstance::new(tasks, 2).unwrap());
            for i in 0..m.n_tasks() {
                for k in 0..m.n_tasks() {
                    if i != k {
                        prop_assert_eq!(m.overlaps(i, k), m.overlaps(k, i));
                    }
                }
            }
        }
    }
}
