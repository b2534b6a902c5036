//! Crate-wide error type for constructor and input validation.
//!
//! Dimension mismatches between already-validated values are programmer
//! errors and panic via `assert!` at the call site; everything that depends
//! on user-supplied numbers returns [`Error`].

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix entries must be finite")]
    NonFiniteEntries,

    #[error("matrix is not unitary: |U^H U - 1| = {deviation:.3e} exceeds {tolerance:.0e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("state norm deviates from 1 by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("density matrix is not Hermitian: |rho - rho^H| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("density matrix trace deviates from 1 by {deviation:.3e}")]
    TraceNotOne { deviation: f64 },

    #[error("density matrix has eigenvalue {eigenvalue:.3e} below the -1e-10 floor")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("projectors do not form an orthogonal resolution of identity: {reason}")]
    InvalidProjectors { reason: String },

    #[error("outcome probabilities sum to {sum} instead of 1")]
    InvalidDistribution { sum: f64 },

    #[error("blocking pattern must leave at least one channel open")]
    AllChannelsBlocked,

    #[error("negative measurement requires exactly one open channel, found {open}")]
    NotSingleOpenChannel { open: usize },

    #[error("value assignment has no entry for slot {slot}")]
    MissingAssignmentSlot { slot: usize },

    #[error("value assignment for slot {slot} must use values from {{-1,+1}} or from {{0,1}}")]
    InvalidAssignmentValues { slot: usize },

    #[error("protocol with {slots} time slots needs {expected} unitaries, got {got}")]
    WrongUnitaryCount { slots: usize, expected: usize, got: usize },

    #[error("preparation slot requires the initial state to be basis state {outcome}")]
    PreparationMismatch { outcome: usize },

    #[error("parameter vector has length {got}, expected {expected}")]
    WrongParameterLength { expected: usize, got: usize },

    #[error("counts are all zero, cannot normalize")]
    AllCountsZero,

    #[error("detector efficiencies must lie in (0, 1]")]
    InvalidEfficiency,

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}
