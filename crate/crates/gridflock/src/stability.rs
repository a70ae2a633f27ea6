//! Delay-margin analysis of a frozen closed loop.
//!
//! After the adaptive gains have settled, the network behaves like the
//! linear system `I (x) A - (diag(rho) Lbar) (x) B B'P` with per-link
//! transport delays. Stability under delay is screened in the frequency
//! domain: the loop is delay-stable if the undelayed matrix is Hurwitz
//! and `j w I - M(w)` stays nonsingular along the imaginary axis, where
//! `M(w)` carries each off-diagonal Laplacian entry through its delay
//! phase `exp(-j w tau_ij)`. Conjugate symmetry makes `w >= 0` enough.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{expanded_laplacian, laplacian, EventBoundary};
use crate::linalg::{
    self, care::double_integrator, max_real_eigenvalue, ComplexMatrix, RealMatrix,
};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum StabilityError {
    #[error("undelayed closed loop is not Hurwitz (max eigenvalue real part {max_real_part})")]
    UndelayedUnstable { max_real_part: f64 },
    #[error("every agent is isolated at the freeze time; there is no loop to analyze")]
    NoActiveAgents,
}

/// Closed loop frozen at one operating point: settled gains, the
/// expanded Laplacian of the surviving graph, the per-link delay
/// matrix, and the agent model with its Riccati design.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLoop {
    /// Settled adaptive gain of each surviving agent.
    pub rho: Vec<f64>,
    /// Expanded Laplacian (graph Laplacian plus reference-flag diagonal).
    pub lbar: RealMatrix,
    /// Per-link delay in seconds; diagonal entries are ignored.
    pub delays: RealMatrix,
    /// Agent drift matrix.
    pub a: RealMatrix,
    /// Agent input column.
    pub b: RealMatrix,
    /// Riccati design matrix.
    pub p: RealMatrix,
}

impl FrozenLoop {
    /// Frozen loop over the double-integrator agent model with the
    /// design matrix `p`.
    pub fn new(rho: Vec<f64>, lbar: RealMatrix, delays: RealMatrix, p: RealMatrix) -> FrozenLoop {
        let (a, b) = double_integrator();
        FrozenLoop {
            rho,
            lbar,
            delays,
            a,
            b,
            p,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.rho.len()
    }

    fn bbtp(&self) -> RealMatrix {
        &self.b * (self.b.transpose() * &self.p)
    }
}

/// Sweep verdict and the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub pass: bool,
    pub min_sigma: f64,
    pub argmin_omega: f64,
    pub omega_max: f64,
    pub grid_points: usize,
    pub threshold: f64,
}

/// Undelayed stacked closed-loop matrix `I (x) A - (diag(rho) Lbar) (x) BB'P`.
pub fn closed_loop_matrix(frozen: &FrozenLoop) -> RealMatrix {
    let n = frozen.agent_count();
    let eye = RealMatrix::identity(n, n);
    let rho_l = RealMatrix::from_diagonal(&DVector::from_vec(frozen.rho.clone())) * &frozen.lbar;
    eye.kronecker(&frozen.a) - rho_l.kronecker(&frozen.bbtp())
}

/// Roundoff guard for the Hurwitz verdict, relative to the matrix norm.
const HURWITZ_MARGIN: f64 = 1e-9;

/// Largest eigenvalue real part and whether it clears zero by more
/// than roundoff. Eigenvalues computed at `-1e-12` from a spectrum
/// that actually touches the imaginary axis must not pass, so the
/// verdict requires `max_re < -1e-9 max(1, frobenius(M))`.
pub fn hurwitz_check(m: &RealMatrix) -> (bool, f64) {
    let max_re = max_real_eigenvalue(m);
    (max_re < -HURWITZ_MARGIN * m.norm().max(1.0), max_re)
}

/// Laplacian seen through the delayed links at frequency `omega`:
/// off-diagonal entries pick up `exp(-j omega tau_ij)`, the diagonal
/// (an agent's view of itself) is delay-free and stays real.
pub fn delay_laplacian(lbar: &RealMatrix, delays: &RealMatrix, omega: f64) -> ComplexMatrix {
    let n = lbar.nrows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let entry = Complex::new(lbar[(i, j)], 0.0);
            out[(i, j)] = if i == j {
                entry
            } else {
                entry * Complex::new(0.0, -omega * delays[(i, j)]).exp()
            };
        }
    }
    out
}

fn complexify(m: &RealMatrix) -> ComplexMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

/// Default sweep ceiling: ten times a coarse bound on the closed-loop
/// natural frequencies, `10 (||A||_F + max(rho) lmax(Lbar) ||BB'P||_F)`.
pub fn default_omega_max(frozen: &FrozenLoop) -> f64 {
    let lbar_sym = linalg::symmetrize(&frozen.lbar);
    let lmax = linalg::symmetric_eigenvalues(&lbar_sym)
        .expect("symmetrized matrix is symmetric")
        .last()
        .copied()
        .unwrap_or(0.0);
    let rho_max = frozen.rho.iter().cloned().fold(0.0, f64::max);
    10.0 * (frozen.a.norm() + rho_max * lmax * frozen.bbtp().norm())
}

/// Default singularity threshold, scaled to the undelayed loop:
/// `1e-8 max(1, ||M0||_F)`.
pub fn default_threshold(frozen: &FrozenLoop) -> f64 {
    1e-8 * closed_loop_matrix(frozen).norm().max(1.0)
}

/// Sweeps `sigma_min(j w I - M(w))` over `w` in `[0, omega_max]` on an
/// inclusive uniform grid. Requires the undelayed loop to be Hurwitz;
/// passes when the smallest singular value stays above `threshold`.
pub fn frequency_sweep(
    frozen: &FrozenLoop,
    omega_max: f64,
    grid_points: usize,
    threshold: f64,
) -> Result<SweepReport, StabilityError> {
    let m0 = closed_loop_matrix(frozen);
    let (stable, max_real_part) = hurwitz_check(&m0);
    if !stable {
        return Err(StabilityError::UndelayedUnstable { max_real_part });
    }
    let n = frozen.agent_count();
    let dim = n * frozen.a.nrows();
    let eye_a = complexify(&RealMatrix::identity(n, n).kronecker(&frozen.a));
    let bbtp = complexify(&frozen.bbtp());
    let diag_rho = ComplexMatrix::from_diagonal(&DVector::from_iterator(
        n,
        frozen.rho.iter().map(|&r| Complex::new(r, 0.0)),
    ));

    let mut min_sigma = f64::INFINITY;
    let mut argmin_omega = 0.0;
    for g in 0..grid_points.max(1) {
        let omega = if grid_points > 1 {
            omega_max * g as f64 / (grid_points - 1) as f64
        } else {
            0.0
        };
        let ld = delay_laplacian(&frozen.lbar, &frozen.delays, omega);
        let m = &eye_a - (&diag_rho * ld).kronecker(&bbtp);
        let mut shifted = -m;
        for d in 0..dim {
            shifted[(d, d)] += Complex::new(0.0, omega);
        }
        let sigma = linalg::sigma_min_complex(&shifted);
        if sigma < min_sigma {
            min_sigma = sigma;
            argmin_omega = omega;
        }
    }
    Ok(SweepReport {
        pass: min_sigma > threshold,
        min_sigma,
        argmin_omega,
        omega_max,
        grid_points: grid_points.max(1),
        threshold,
    })
}

/// Freezes the loop a finished run would leave behind: the persistent
/// topology at t_end (all events applied; transient loss masks ignored,
/// since the margin question concerns the durable network), isolated
/// agents dropped and the rest reindexed, measured gains attached, and
/// every link delay scaled by `delay_multiplier` to probe the margin.
pub fn frozen_loop_from_run(
    config: &ScenarioConfig,
    rho_final: &[f64],
    delay_multiplier: f64,
    p: &RealMatrix,
) -> Result<FrozenLoop, StabilityError> {
    let n = config.agent_count();
    let topo = config
        .graph
        .persistent_topology_at(config.solver.t_end_s, EventBoundary::Inclusive);
    let keep: Vec<usize> = (0..n).filter(|&i| !topo.isolated[i]).collect();
    if keep.is_empty() {
        return Err(StabilityError::NoActiveAgents);
    }
    let m = keep.len();
    let mut weights = RealMatrix::zeros(m, m);
    let mut delays = RealMatrix::zeros(m, m);
    for (r, &i) in keep.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            weights[(r, c)] = topo.weights[(i, j)];
            delays[(r, c)] = topo.delays[(i, j)] * delay_multiplier;
        }
    }
    let flags: Vec<u8> = keep.iter().map(|&i| topo.flags[i]).collect();
    let l = laplacian(&weights).expect("schedule topologies are symmetric by construction");
    let lbar = expanded_laplacian(&l, &flags);
    let rho = keep.iter().map(|&i| rho_final[i]).collect();
    Ok(FrozenLoop::new(rho, lbar, delays, p.clone()))
}
