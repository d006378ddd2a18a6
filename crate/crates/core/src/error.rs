use thiserror::Error;

use crate::bsm::Outcome;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid qubit count {0}; supported range is 1..=3")]
    QubitCount(usize),

    #[error("expected {expected} amplitudes or matrix entries, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("tensor product would hold {0} qubits; at most 3 are supported")]
    TooManyQubits(usize),

    #[error("invalid subsystem selection {0:?}")]
    Subsystem(alloc::vec::Vec<usize>),

    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),

    #[error("density matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    Trace(f64),

    #[error("density matrix is not positive semidefinite")]
    NotPositive,

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },

    #[error("envelope has no probability mass inside the detection gate")]
    EmptyGate,

    #[error("invalid envelope: {0}")]
    Envelope(&'static str),

    #[error("no {0:?} events survive the window; the estimate is undefined")]
    NoEvents(Outcome),

    #[error("tomography basis {0} has no counts")]
    EmptyBasis(char),

    #[error("outcome {0:?} does not herald a receiver state")]
    NotHeralding(Outcome),
}

pub type Result<T> = core::result::Result<T, Error>;
