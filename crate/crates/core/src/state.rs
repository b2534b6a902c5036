//! Pure states and density matrices for an N-level system.
//!
//! Invariants are checked eagerly at construction: unit norm for pure
//! states; Hermiticity, unit trace, and positive semidefiniteness (to a
//! small floor) for density matrices. Evolution preserves all of them, so
//! internal operations skip re-validation outside debug builds.

use nalgebra::SymmetricEigen;

use crate::error::Error;
use crate::linalg::{cr, ComplexMatrix, ComplexVector, UnitaryMatrix};

/// Tolerance on the Euclidean norm of a pure state.
pub const NORM_TOL: f64 = 1e-10;
/// Frobenius tolerance on `rho - rho^H`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on `|Tr rho - 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues of a density matrix may undershoot zero by at most this much.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Unit-norm amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self, Error> {
        if !amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFiniteEntries);
        }
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut v = ComplexVector::zeros(dim);
        v[index] = cr(1.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    /// `U |psi>`; norm is preserved by unitarity.
    pub fn evolve(&self, u: &UnitaryMatrix) -> Self {
        Self {
            amplitudes: u.apply_vector(&self.amplitudes),
        }
    }

    /// Rank-1 projector `|psi><psi|`.
    pub fn to_density(&self) -> DensityMatrix {
        let n = self.dim();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        });
        DensityMatrix::from_checked(m)
    }
}

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, Error> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if !matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFiniteEntries);
        }
        let hermitian_deviation = (&matrix - matrix.adjoint()).norm();
        if hermitian_deviation > HERMITICITY_TOL {
            return Err(Error::NotHermitian {
                deviation: hermitian_deviation,
            });
        }
        let trace_deviation = (matrix.trace() - cr(1.0)).norm();
        if trace_deviation > TRACE_TOL {
            return Err(Error::TraceNotOne {
                deviation: trace_deviation,
            });
        }
        let min = smallest_eigenvalue(&matrix);
        if min < EIGENVALUE_FLOOR {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    /// For results of invariant-preserving operations on validated inputs.
    pub(crate) fn from_checked(matrix: ComplexMatrix) -> Self {
        debug_assert!((&matrix - matrix.adjoint()).norm() <= HERMITICITY_TOL);
        debug_assert!((matrix.trace() - cr(1.0)).norm() <= TRACE_TOL);
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        assert!(dim >= 1, "maximally_mixed needs dim >= 1");
        let m = ComplexMatrix::identity(dim, dim) * cr(1.0 / dim as f64);
        Self::from_checked(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `U rho U^H`. Panics on dimension mismatch.
    pub fn evolve(&self, u: &UnitaryMatrix) -> Self {
        assert_eq!(
            self.dim(),
            u.dim(),
            "cannot evolve a {}-level state with a {}-dimensional unitary",
            self.dim(),
            u.dim()
        );
        Self::from_checked(u.matrix() * &self.matrix * u.matrix().adjoint())
    }

    /// Smallest eigenvalue of the Hermitian part; diagnostic for PSD checks.
    pub fn smallest_eigenvalue(&self) -> f64 {
        smallest_eigenvalue(&self.matrix)
    }
}

fn smallest_eigenvalue(m: &ComplexMatrix) -> f64 {
    let hermitized = (m + m.adjoint()) * cr(0.5);
    let eig = SymmetricEigen::new(hermitized);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// A system state in either representation. Protocol code converts to a
/// density matrix before applying measurement channels.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(p) => p.dim(),
            QuantumState::Mixed(m) => m.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(p) => p.to_density(),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    pub fn evolve(&self, u: &UnitaryMatrix) -> QuantumState {
        match self {
            QuantumState::Pure(p) => QuantumState::Pure(p.evolve(u)),
            QuantumState::Mixed(m) => QuantumState::Mixed(m.evolve(u)),
        }
    }
}

impl From<PureState> for QuantumState {
    fn from(p: PureState) -> Self {
        QuantumState::Pure(p)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(m: DensityMatrix) -> Self {
        QuantumState::Mixed(m)
    }
}
