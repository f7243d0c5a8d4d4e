//! Variational scheduling of fixed-interval tasks on shared resources.
//!
//! Tasks with fixed `[start, end)` windows must each run on one of `J`
//! identical resources; two overlapping tasks may not share one. The problem
//! is encoded as a penalty QUBO, split into an assignment Hamiltonian `H_p`
//! and a conflict Hamiltonian `H_c` whose penalty gates are controlled by
//! ancilla qubits carrying pairwise overlap coefficients, and minimized with
//! a layered ansatz (`H_p`, `H_c`, transverse mixer `H_B`) whose angles are
//! tuned by COBYLA under three strategies: a single full-depth optimization,
//! a layer-wise warm-started sweep, and a two-step interpolation.
//!
//! Modules follow the pipeline: [`model`] (instances, overlap ground truth) →
//! [`qubo`] (coefficients, Ising form) → [`circuits`] (conflict detection and
//! the ansatz) → [`sim`] (dense statevector engine) → [`optimize`]
//! (strategies) → [`harness`] (batch runner, export, decoding).

pub mod circuits;
pub mod harness;
pub mod model;
pub mod optimize;
pub mod qubo;
pub mod sim;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unknown test set {0}: built-in sets are 1..=6")]
    UnknownTestSet(usize),
    #[error("instance document: {0}")]
    Document(String),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter vector mismatch: {0}")]
    ParameterMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
