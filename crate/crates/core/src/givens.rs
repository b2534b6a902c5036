//! Decomposition of real special-orthogonal evolution stages into plane
//! (Givens) rotations, the granularity at which wave-plate angle errors
//! enter the apparatus model.
//!
//! The plane order is fixed: for each column in turn, the below-diagonal
//! entries are eliminated top to bottom, giving planes (0,1), (0,2),
//! (1,2) for a three-level stage. A dimension-n stage always decomposes
//! into exactly n(n-1)/2 rotations, zero angles included, so perturbation
//! models see a stable angle count.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::linalg::{cr, ComplexMatrix, UnitaryMatrix};

/// Largest imaginary part or determinant deviation tolerated when
/// interpreting a unitary as a real rotation.
pub const REAL_ROTATION_TOL: f64 = 1e-10;
/// Reconstruction accuracy of `compose_rotations(decompose_rotation(u))`.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

/// One two-level rotation by `angle` in the plane of basis axes
/// `plane.0 < plane.1`, identity elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRotation {
    pub plane: (usize, usize),
    pub angle: f64,
}

/// The rotation matrix of a single [`PlaneRotation`]: `cos` on both plane
/// diagonal entries, `-sin` above, `+sin` below.
pub fn rotation_matrix(dim: usize, plane: (usize, usize), angle: f64) -> UnitaryMatrix {
    let (p, q) = plane;
    assert!(p < q && q < dim, "invalid rotation plane ({p}, {q}) in dimension {dim}");
    let (s, c) = angle.sin_cos();
    let mut m = ComplexMatrix::identity(dim, dim);
    m[(p, p)] = cr(c);
    m[(q, q)] = cr(c);
    m[(p, q)] = cr(-s);
    m[(q, p)] = cr(s);
    UnitaryMatrix::from_checked(m)
}

/// Product of the rotations in the given order (leftmost first).
pub fn compose_rotations(dim: usize, rotations: &[PlaneRotation]) -> UnitaryMatrix {
    let mut acc = UnitaryMatrix::identity(dim);
    for r in rotations {
        acc = acc.compose(&rotation_matrix(dim, r.plane, r.angle));
    }
    acc
}

/// Splits a real special-orthogonal unitary into the fixed sequence of
/// plane rotations whose ordered product reproduces it within
/// [`DECOMPOSITION_TOL`].
///
/// Errors if the matrix has imaginary parts beyond [`REAL_ROTATION_TOL`]
/// or determinant -1; those lie outside the rotation family this
/// decomposition covers.
pub fn decompose_rotation(u: &UnitaryMatrix) -> Result<Vec<PlaneRotation>, Error> {
    let n = u.dim();
    let m = u.matrix();
    let worst_im = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_im > REAL_ROTATION_TOL {
        return Err(Error::InvalidConfig {
            reason: format!("matrix has imaginary entries up to {worst_im:.3e}, not a real rotation"),
        });
    }
    let mut r = DMatrix::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
    let det = r.clone().determinant();
    if (det - 1.0).abs() > REAL_ROTATION_TOL {
        return Err(Error::InvalidConfig {
            reason: format!("determinant {det:.6} is not +1, not a special-orthogonal rotation"),
        });
    }
    let mut rotations = Vec::with_capacity(n * (n - 1) / 2);
    for col in 0..n - 1 {
        for row in col + 1..n {
            let angle = r[(row, col)].atan2(r[(col, col)]);
            rotations.push(PlaneRotation {
                plane: (col, row),
                angle,
            });
            // Apply the inverse rotation on the left, zeroing (row, col)
            // and leaving (col, col) non-negative.
            let (s, c) = angle.sin_cos();
            for j in 0..n {
                let top = r[(col, j)];
                let bot = r[(row, j)];
                r[(col, j)] = c * top + s * bot;
                r[(row, j)] = -s * top + c * bot;
            }
        }
    }
    debug_assert!(
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .all(|(i, j)| (r[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8),
        "residual after elimination is not the identity"
    );
    Ok(rotations)
}
