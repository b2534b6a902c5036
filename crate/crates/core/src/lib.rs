//! Simulator and optimization toolkit for Leggett-Garg tests on N-level
//! systems with M-outcome measurements.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: checked unitaries, the two-angle three-level rotation
//!   family, Haar sampling, and Hermitian-generator exponentials.
//! - [`state`]: pure states and density matrices with eager invariant checks.
//! - [`measurement`]: projective outcome statistics, Lueders collapse,
//!   dephasing (blind) measurement, and blocking-based negative measurement.
//! - [`protocol`]: two-point correlation protocols, K3/K4 correlators,
//!   closed-form cross-checks, and the no-signalling-in-time witness.
//! - [`optimizer`]: multistart simplex maximization of K3/K4 over unitaries,
//!   outcome labelings, and (optionally) preparations.
//! - [`givens`]: plane-rotation decomposition of real orthogonal matrices,
//!   used by the angle-error model.
//! - [`counting`]: finite-count statistics, detector-efficiency correction,
//!   and Monte Carlo error propagation for K values.

pub mod counting;
pub mod error;
pub mod givens;
pub mod linalg;
pub mod measurement;
pub mod optimizer;
pub mod protocol;
mod rng;
pub mod state;

pub use error::Error;
