//! Small dense matrix operations shared across the toolkit.
//!
//! Everything here targets the problem sizes this toolkit actually meets
//! (n up to a few dozen): dense storage, direct factorizations, no
//! sparsity. Real and complex paths are separate; complex matrices only
//! appear in the frequency-sweep analyzer.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};
use thiserror::Error;

pub mod care;

pub use care::{solve_care, CareSolution};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex<f64>>;

/// Relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Iteration cap for one Schur decomposition attempt.
const SCHUR_MAX_ITER: usize = 75_000;

/// Orthogonal-similarity retries before giving up on an eigensolve.
const SCHUR_RETRIES: u64 = 8;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error(
        "matrix is not symmetric: max |S_ij - S_ji| = {max_asymmetry:.3e} exceeds {tolerance:.3e}"
    )]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },
    #[error("matrix is not positive definite: min eigenvalue = {min_eigenvalue:.3e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error(
        "(A, B) is not stabilizable: unstabilizable mode near eigenvalue {real:.6}{imag:+.6}i"
    )]
    NotStabilizable { real: f64, imag: f64 },
    #[error("iteration failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("eigenvalue iteration failed to converge")]
    EigenIterationFailed,
}

/// Returns `(S + S^T) / 2`, removing roundoff-order asymmetry.
pub fn symmetrize(s: &RealMatrix) -> RealMatrix {
    (s + s.transpose()) * 0.5
}

/// Checks that `S` is square and symmetric within `SYMMETRY_TOL`
/// relative to `max(1, frobenius(S))`.
pub fn check_symmetric(s: &RealMatrix) -> Result<(), LinalgError> {
    let tolerance = SYMMETRY_TOL * s.norm().max(1.0);
    if !s.is_square() {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry: f64::INFINITY,
            tolerance,
        });
    }
    let mut max_asymmetry = 0.0f64;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            max_asymmetry = max_asymmetry.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if max_asymmetry > tolerance {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry,
            tolerance,
        });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
///
/// The input is symmetrized before decomposition, so roundoff-order
/// asymmetry never reaches the eigensolver.
pub fn symmetric_eigenvalues(s: &RealMatrix) -> Result<Vec<f64>, LinalgError> {
    check_symmetric(s)?;
    let eig = symmetrize(s).symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// True iff the smallest eigenvalue of symmetric `S` is strictly positive.
pub fn is_positive_definite(s: &RealMatrix) -> Result<bool, LinalgError> {
    let values = symmetric_eigenvalues(s)?;
    Ok(values.first().is_some_and(|&lo| lo > 0.0))
}

/// Eigenvalues read off a converged real Schur form: 1x1 diagonal
/// blocks are real eigenvalues, 2x2 blocks hold conjugate pairs (or a
/// real pair, resolved through the block's characteristic quadratic).
fn quasi_triangular_eigenvalues(t: &RealMatrix) -> Vec<Complex<f64>> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        let sub = if k + 1 < n { t[(k + 1, k)] } else { 0.0 };
        let block_scale = if k + 1 < n {
            t[(k, k)].abs() + t[(k + 1, k + 1)].abs()
        } else {
            0.0
        };
        if sub.abs() <= f64::EPSILON * block_scale.max(1.0) {
            out.push(Complex::new(t[(k, k)], 0.0));
            k += 1;
        } else {
            let (a, b) = (t[(k, k)], t[(k, k + 1)]);
            let (c, d) = (t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                out.push(Complex::new(half_tr + s, 0.0));
                out.push(Complex::new(half_tr - s, 0.0));
            } else {
                let s = (-disc).sqrt();
                out.push(Complex::new(half_tr, s));
                out.push(Complex::new(half_tr, -s));
            }
            k += 2;
        }
    }
    out
}

/// Deterministic "random" orthogonal matrix for similarity retries,
/// built by QR-factorizing a hash-filled square matrix.
fn scrambling_orthogonal(n: usize, attempt: u64) -> RealMatrix {
    let filler = RealMatrix::from_fn(n, n, |i, j| {
        crate::rng::unit_from_bits(crate::rng::hash_draw(
            0x5ca1ab1e, i as u64, j as u64, attempt,
        )) - 0.5
    });
    filler.qr().q()
}

/// Eigenvalues of a real square matrix, or `None` if the QR iteration
/// refuses to converge.
///
/// The underlying iteration is capped rather than unbounded (it is
/// known to stall on some structured matrices, e.g. defective ones with
/// exactly repeated eigenvalues). Failed attempts are retried under
/// deterministic random orthogonal similarities, which leave the
/// spectrum unchanged but break the stalling structure.
pub fn eigenvalues_bounded(m: &RealMatrix) -> Option<Vec<Complex<f64>>> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    for attempt in 0..=SCHUR_RETRIES {
        let candidate = if attempt == 0 {
            m.clone()
        } else {
            let q = scrambling_orthogonal(m.nrows(), attempt);
            q.transpose() * m * q
        };
        if let Some(schur) = Schur::try_new(candidate, f64::EPSILON, SCHUR_MAX_ITER) {
            let (_, t) = schur.unpack();
            return Some(quasi_triangular_eigenvalues(&t));
        }
    }
    None
}

/// Largest real part over the eigenvalues of a real square matrix.
///
/// Falls back to the Gershgorin row bound `max_i (m_ii + sum_j |m_ij|)`
/// if the eigensolve fails outright; the bound can only overestimate,
/// so a stability screen built on it errs on the safe side.
pub fn max_real_eigenvalue(m: &RealMatrix) -> f64 {
    if let Some(eigs) = eigenvalues_bounded(m) {
        return eigs
            .iter()
            .map(|ev| ev.re)
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let mut bound = f64::NEG_INFINITY;
    for i in 0..m.nrows() {
        let radius: f64 = (0..m.ncols())
            .filter(|&j| j != i)
            .map(|j| m[(i, j)].abs())
            .sum();
        bound = bound.max(m[(i, i)] + radius);
    }
    bound
}

/// Smallest singular value of a complex matrix (compact-SVD sense:
/// the least of its `min(rows, cols)` singular values), computed as
/// `sqrt(lmin(H))` for the smaller Hermitian Gram product `H`, through
/// the real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` (whose
/// spectrum is that of `H`, doubled). The iterative complex SVD is
/// avoided on purpose: it can stall on structured inputs.
pub fn sigma_min_complex(s: &ComplexMatrix) -> f64 {
    let h = if s.nrows() >= s.ncols() {
        s.adjoint() * s
    } else {
        s * s.adjoint()
    };
    let d = h.nrows();
    let mut g = RealMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let v = h[(i, j)];
            g[(i, j)] = v.re;
            g[(i + d, j + d)] = v.re;
            g[(i, j + d)] = -v.im;
            g[(i + d, j)] = v.im;
        }
    }
    let eigs =
        symmetric_eigenvalues(&symmetrize(&g)).expect("embedding is symmetric by construction");
    eigs[0].max(0.0).sqrt()
}

/// Solves the Lyapunov equation `F^T X + X F + Q = 0` for `X`.
///
/// Uses the Kronecker vectorization `(I (x) F^T + F^T (x) I) vec(X) = -vec(Q)`
/// with a dense LU solve; fine for the n <= ~32 sizes this toolkit handles.
/// The operator is nonsingular iff no two eigenvalues of `F` sum to zero
/// (always true for Hurwitz `F`).
pub fn lyapunov_solve(f: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix, LinalgError> {
    let n = f.nrows();
    assert!(
        f.is_square() && q.nrows() == n && q.ncols() == n,
        "dimension mismatch"
    );
    let ident = RealMatrix::identity(n, n);
    let ft = f.transpose();
    let lhs = ident.kronecker(&ft) + ft.kronecker(&ident);
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice()) * -1.0;
    let x = lhs.lu().solve(&rhs).ok_or(LinalgError::NoConvergence {
        residual: f64::INFINITY,
        iterations: 0,
    })?;
    Ok(RealMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Pseudo-inverse of a symmetric positive-semidefinite matrix via its
/// eigendecomposition. Eigenvalues below `1e-12 * max(1, lambda_max)` are
/// treated as zero.
pub fn pseudo_inverse_sym(z: &RealMatrix) -> RealMatrix {
    let eig = symmetrize(z).symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let cutoff = 1e-12 * lambda_max.max(1.0);
    let inv = nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }),
    );
    &eig.eigenvectors * RealMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}
