//! Dense complex linear algebra for small N-level systems.
//!
//! Desk scale only: N <= 16, everything stored dense, invariants checked
//! eagerly at construction. [`UnitaryMatrix`] wraps a matrix with a verified
//! unitarity bound; [`make_unitary`] builds the two-angle three-level
//! rotation family used by the protocol module; [`random_unitary`] samples
//! Haar-distributed unitaries for optimizer restarts and property tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Error;

/// Dense complex matrix, the only matrix representation used in this crate.
pub type ComplexMatrix = DMatrix<Complex64>;
/// Dense complex vector (state amplitudes).
pub type ComplexVector = DVector<Complex64>;

/// Frobenius-norm tolerance for the unitarity invariant `U^H U = 1`.
pub const UNITARITY_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius distance of `m` from the identity of its own dimension.
fn identity_deviation(m: &ComplexMatrix) -> f64 {
    (m - ComplexMatrix::identity(m.nrows(), m.ncols())).norm()
}

/// The two angles parameterizing the three-level rotation family of
/// [`make_unitary`]. Angles are radians; [`EvolutionParams::normalized`]
/// maps both into the canonical range [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    pub theta: f64,
    pub phi: f64,
}

impl EvolutionParams {
    pub fn new(theta: f64, phi: f64) -> Result<Self, Error> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::NonFiniteEntries);
        }
        Ok(Self { theta, phi })
    }

    /// Same rotation with both angles reduced to [0, 2pi).
    pub fn normalized(self) -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            theta: self.theta.rem_euclid(tau),
            phi: self.phi.rem_euclid(tau),
        }
    }
}

/// N x N complex matrix with the invariant `|U^H U - 1|_F <= 1e-10`,
/// checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    matrix: ComplexMatrix,
}

impl UnitaryMatrix {
    /// Validates squareness, finiteness, and unitarity within
    /// [`UNITARITY_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self, Error> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if !all_finite(&matrix) {
            return Err(Error::NonFiniteEntries);
        }
        let deviation = identity_deviation(&(matrix.adjoint() * &matrix));
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary {
                deviation,
                tolerance: UNITARITY_TOL,
            });
        }
        Ok(Self { matrix })
    }

    /// For products and adjoints of already-validated unitaries, where the
    /// invariant holds by construction.
    pub(crate) fn from_checked(matrix: ComplexMatrix) -> Self {
        debug_assert!(
            identity_deviation(&(matrix.adjoint() * &matrix)) <= UNITARITY_TOL,
            "unitarity drifted past tolerance"
        );
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_checked(ComplexMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_checked(self.matrix.adjoint())
    }

    /// Matrix product `self * other`. Panics on dimension mismatch.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(
            self.dim(),
            other.dim(),
            "cannot compose unitaries of dimensions {} and {}",
            self.dim(),
            other.dim()
        );
        Self::from_checked(&self.matrix * &other.matrix)
    }

    /// Applies the unitary to a raw amplitude vector. Panics on dimension
    /// mismatch.
    pub fn apply_vector(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(
            self.dim(),
            v.len(),
            "cannot apply a {}-dimensional unitary to a {}-vector",
            self.dim(),
            v.len()
        );
        &self.matrix * v
    }

    /// Frobenius deviation of `U^H U` from the identity; diagnostic only.
    pub fn unitarity_deviation(&self) -> f64 {
        identity_deviation(&(self.matrix.adjoint() * &self.matrix))
    }
}

/// The three-level rotation family used between measurement times:
///
/// ```text
///        ( cos t            0          sin t          )
/// U(t,p) = ( sin t sin p      cos p     -cos t sin p   )
///        ( -sin t cos p     sin p      cos t cos p    )
/// ```
///
/// Real orthogonal with determinant +1 for every parameter choice.
pub fn make_unitary(params: EvolutionParams) -> UnitaryMatrix {
    let (st, ct) = params.theta.sin_cos();
    let (sp, cp) = params.phi.sin_cos();
    let m = ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            cr(ct),
            cr(0.0),
            cr(st),
            cr(st * sp),
            cr(cp),
            cr(-ct * sp),
            cr(-st * cp),
            cr(sp),
            cr(ct * cp),
        ],
    );
    UnitaryMatrix::from_checked(m)
}

/// Haar-distributed random unitary, deterministic for a fixed seed.
pub fn random_unitary(dim: usize, seed: u64) -> UnitaryMatrix {
    assert!(dim >= 2, "random_unitary needs dim >= 2, got {dim}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unitary_from_rng(dim, &mut rng)
}

/// Haar sampling via QR of a complex Gaussian matrix; the diagonal phase
/// correction makes the distribution exactly Haar rather than QR-convention
/// dependent.
pub fn random_unitary_from_rng<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    let (q, r) = g.qr().unpack();
    let phases = DVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        if d.norm() == 0.0 {
            cr(1.0)
        } else {
            d / d.norm()
        }
    });
    let mut m = q;
    for j in 0..dim {
        for i in 0..dim {
            m[(i, j)] *= phases[j];
        }
    }
    UnitaryMatrix::from_checked(m)
}

/// `exp(iH)` for Hermitian `H`, via eigendecomposition. Panics if `h` is not
/// square; callers guarantee Hermiticity (the builder in the optimizer does
/// so by construction).
pub fn exp_i_hermitian(h: &ComplexMatrix) -> UnitaryMatrix {
    assert_eq!(h.nrows(), h.ncols(), "exp_i_hermitian needs a square matrix");
    debug_assert!(
        (h - h.adjoint()).norm() <= 1e-10 * (1.0 + h.norm()),
        "exp_i_hermitian input is not Hermitian"
    );
    let eig = SymmetricEigen::new(h.clone());
    let dim = h.nrows();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for k in 0..dim {
        let phase = c(0.0, eig.eigenvalues[k]).exp();
        let v = eig.eigenvectors.column(k);
        // m += phase * v v^H, accumulated entrywise to avoid temporaries.
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] += phase * v[i] * v[j].conj();
            }
        }
    }
    UnitaryMatrix::from_checked(m)
}
