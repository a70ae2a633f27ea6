//! Continuous algebraic Riccati equation solver.
//!
//! Solves `P A + A^T P - P B B^T P + M = 0` for the unique stabilizing
//! `P > 0` via Newton-Kleinman iteration. The starting gain comes from a
//! Bass-style shifted Lyapunov construction, which stabilizes any
//! stabilizable pair without pole-placement machinery; stabilizability
//! itself is screened first with a PBH rank test. System sizes here are
//! tiny, so robustness is the design axis, not asymptotic cost.

use nalgebra::Complex;

use super::{
    check_symmetric, is_positive_definite, lyapunov_solve, max_real_eigenvalue, pseudo_inverse_sym,
    symmetric_eigenvalues, symmetrize, ComplexMatrix, LinalgError, RealMatrix,
};

/// Relative residual tolerance: the returned solution satisfies
/// `frobenius(residual) <= RESIDUAL_TOL * max(1, frobenius(M))`.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 100;

/// Stabilizing solution of the Riccati equation, with its verified
/// residual and the feedback row `B^T P` the protocol consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    /// Symmetric positive-definite solution matrix.
    pub p: RealMatrix,
    /// Frobenius norm of `P A + A^T P - P B B^T P + M`.
    pub residual_norm: f64,
    /// `B^T P`, shaped m x n (a single row for single-input systems).
    pub feedback_row: RealMatrix,
}

/// PBH stabilizability test: every eigenvalue of `A` with nonnegative
/// real part must keep `[A - lambda I, B]` at full row rank.
fn check_stabilizable(a: &RealMatrix, b: &RealMatrix) -> Result<(), LinalgError> {
    let n = a.nrows();
    let rank_tol = 1e-8 * (a.norm() + b.norm()).max(1.0);
    let eigenvalues =
        crate::linalg::eigenvalues_bounded(a).ok_or(LinalgError::EigenIterationFailed)?;
    for ev in eigenvalues {
        if ev.re < -1e-9 {
            continue;
        }
        let mut pencil = ComplexMatrix::zeros(n, n + b.ncols());
        for i in 0..n {
            for j in 0..n {
                pencil[(i, j)] = Complex::new(a[(i, j)], 0.0);
            }
            pencil[(i, i)] -= ev;
            for j in 0..b.ncols() {
                pencil[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
            }
        }
        if crate::linalg::sigma_min_complex(&pencil) <= rank_tol {
            return Err(LinalgError::NotStabilizable {
                real: ev.re,
                imag: ev.im,
            });
        }
    }
    Ok(())
}

/// Initial stabilizing gain `K0` such that `A - B K0` is Hurwitz.
///
/// If `A` is already Hurwitz the zero gain works. Otherwise solve the
/// shifted Lyapunov equation `(A + beta I) Z + Z (A + beta I)^T = 2 B B^T`
/// with `beta = 2 frobenius(A) + 1` and take `K0 = B^T Z^+`. The
/// pseudo-inverse covers stabilizable pairs whose stable part is not
/// controllable (there `Z` is singular on the uncontrollable subspace).
fn initial_gain(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    let n = a.nrows();
    if max_real_eigenvalue(a) < 0.0 {
        return Ok(RealMatrix::zeros(b.ncols(), n));
    }
    let beta = 2.0 * a.norm() + 1.0;
    let a_beta = a + RealMatrix::identity(n, n) * beta;
    let q = b * b.transpose() * -2.0;
    let z = lyapunov_solve(&a_beta.transpose(), &q)?;
    Ok(b.transpose() * pseudo_inverse_sym(&z))
}

/// Solves `P A + A^T P - P B B^T P + M = 0` for the stabilizing `P > 0`.
///
/// Preconditions: `(A, B)` stabilizable and `M` symmetric positive
/// definite. On success `A - B B^T P` is Hurwitz and the residual is
/// within [`RESIDUAL_TOL`] relative to `max(1, frobenius(M))`.
pub fn solve_care(
    a: &RealMatrix,
    b: &RealMatrix,
    m: &RealMatrix,
) -> Result<CareSolution, LinalgError> {
    let n = a.nrows();
    assert!(a.is_square(), "A must be square");
    assert_eq!(b.nrows(), n, "B must have as many rows as A");
    check_symmetric(m)?;
    assert_eq!(m.nrows(), n, "M must match the dimension of A");
    let m_eigs = symmetric_eigenvalues(m)?;
    if m_eigs[0] <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue: m_eigs[0],
        });
    }
    check_stabilizable(a, b)?;

    let tol = RESIDUAL_TOL * m.norm().max(1.0);
    let mut gain = initial_gain(a, b)?;
    let mut residual_norm = f64::INFINITY;

    for iteration in 0..MAX_ITERATIONS {
        let f = a - b * &gain;
        let q = m + gain.transpose() * &gain;
        let p = match lyapunov_solve(&f, &q) {
            Ok(x) => symmetrize(&x),
            Err(_) => {
                return Err(LinalgError::NoConvergence {
                    residual: residual_norm,
                    iterations: iteration,
                })
            }
        };
        let feedback_row = b.transpose() * &p;
        let residual = &p * a + a.transpose() * &p - feedback_row.transpose() * &feedback_row + m;
        residual_norm = residual.norm();
        if residual_norm <= tol {
            if !is_positive_definite(&p)? {
                return Err(LinalgError::NoConvergence {
                    residual: residual_norm,
                    iterations: iteration,
                });
            }
            let closed_loop = a - b * &feedback_row;
            if max_real_eigenvalue(&closed_loop) >= 0.0 {
                return Err(LinalgError::NoConvergence {
                    residual: residual_norm,
                    iterations: iteration,
                });
            }
            return Ok(CareSolution {
                p,
                residual_norm,
                feedback_row,
            });
        }
        gain = feedback_row;
    }
    Err(LinalgError::NoConvergence {
        residual: residual_norm,
        iterations: MAX_ITERATIONS,
    })
}

/// The normalized double-integrator agent pair used throughout the
/// toolkit: `A = [[0, 1], [0, 0]]`, `B = [0, 1]^T`.
pub fn double_integrator() -> (RealMatrix, RealMatrix) {
    let a = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = RealMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    (a, b)
}
