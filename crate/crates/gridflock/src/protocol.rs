//! Scale-free adaptive cooperative voltage-control protocol.
//!
//! Each agent assembles a relative-information vector from its own
//! normalized state, delayed (possibly noisy) neighbor states, and an
//! optional reference term, then drives a double integrator through an
//! adaptively gained linear feedback. The construction consults only the
//! nominal agent pair `(A, B)` and the design weight `M`: nothing in
//! this module takes the network size, connectivity bounds, or a
//! Laplacian, which is what makes the protocol scale-free.

use nalgebra::{Matrix2, RowVector2, Vector2};
use thiserror::Error;

use crate::linalg::CareSolution;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("participation factor must be positive, got {alpha}")]
    NonpositiveAlpha { alpha: f64 },
}

/// Normalized state and adaptive gain of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// `[dQ/alpha, d(dQ)/dt / alpha]` in Var and Var/s.
    pub x: Vector2<f64>,
    /// Adaptive coupling gain, nondecreasing along trajectories.
    pub rho: f64,
}

/// Feedback gain shared by every agent: the Riccati solution `P` and the
/// cached row `BtP` for `B = [0, 1]^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolGain {
    pub p: Matrix2<f64>,
    pub bt_p: RowVector2<f64>,
}

impl ProtocolGain {
    /// Builds the gain from a Riccati solution `P`, caching `B^T P`.
    pub fn new(p: Matrix2<f64>) -> Self {
        let bt_p = RowVector2::new(p[(1, 0)], p[(1, 1)]);
        ProtocolGain { p, bt_p }
    }

    /// Adopts a solver result for the double-integrator agent pair.
    pub fn from_care(solution: &CareSolution) -> Self {
        assert_eq!(solution.p.nrows(), 2, "agent Riccati solution must be 2x2");
        ProtocolGain::new(Matrix2::from_fn(|i, j| solution.p[(i, j)]))
    }
}

/// Relative-information vector of agent `i`:
/// `zeta_bar = sum_j a_ij (x^i - x^j(t - tau_ij)) + l_i (x^i - x^r)`.
///
/// `delayed_neighbors` carries `(j, a_ij, x^j(t - tau_ij))` with the
/// neighbor state already transported (delayed and noise-perturbed) by
/// the caller. Only local quantities enter; `i` and `j` are accepted for
/// self-loop checking and diagnostics.
pub fn compute_zeta(
    i: usize,
    own_state: &Vector2<f64>,
    delayed_neighbors: &[(usize, f64, Vector2<f64>)],
    l_i: u8,
    x_ref: &Vector2<f64>,
) -> Vector2<f64> {
    let mut zeta = Vector2::zeros();
    for &(j, a_ij, ref x_j) in delayed_neighbors {
        debug_assert_ne!(i, j, "self-loops carry no relative information");
        debug_assert!(a_ij >= 0.0, "edge weights are nonnegative");
        zeta += a_ij * (own_state - x_j);
    }
    if l_i != 0 {
        zeta += own_state - x_ref;
    }
    zeta
}

/// Adaptive-gain derivative and control output:
/// `rho_dot = (BtP zeta_bar)^2`, `u = -rho * BtP zeta_bar`.
pub fn protocol_derivatives(zeta_bar: &Vector2<f64>, rho: f64, gain: &ProtocolGain) -> (f64, f64) {
    let s = gain.bt_p[0] * zeta_bar[0] + gain.bt_p[1] * zeta_bar[1];
    (s * s, -rho * s)
}

/// Physical control effort `u' = alpha * u` in Var/s^2.
pub fn denormalize_control(u: f64, alpha_i: f64) -> Result<f64, ProtocolError> {
    if alpha_i <= 0.0 {
        return Err(ProtocolError::NonpositiveAlpha { alpha: alpha_i });
    }
    Ok(alpha_i * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sqrt3_gain() -> ProtocolGain {
        let s3 = 3.0f64.sqrt();
        ProtocolGain::new(Matrix2::new(s3, 1.0, 1.0, s3))
    }

    #[test]
    fn gain_caches_second_row_of_p() {
        let gain = sqrt3_gain();
        assert_eq!(gain.bt_p, RowVector2::new(1.0, 3.0f64.sqrt()));
    }

    #[test]
    fn zeta_vanishes_at_consensus() {
        let x = Vector2::new(2.0, -1.0);
        let neighbors = vec![(1, 1.0, x), (2, 3.5, x)];
        assert_eq!(
            compute_zeta(0, &x, &neighbors, 0, &Vector2::zeros()),
            Vector2::zeros()
        );
    }

    #[test]
    fn zeta_two_agent_examples() {
        let x1 = Vector2::new(1.0, 0.0);
        let neighbors = vec![(1, 1.0, Vector2::zeros())];
        assert_eq!(
            compute_zeta(0, &x1, &neighbors, 0, &Vector2::zeros()),
            Vector2::new(1.0, 0.0)
        );
        let x_ref = Vector2::new(0.5, 0.0);
        assert_eq!(
            compute_zeta(0, &x1, &neighbors, 1, &x_ref),
            Vector2::new(1.5, 0.0)
        );
    }

    #[test]
    fn derivatives_match_closed_form_gain() {
        let gain = sqrt3_gain();
        assert_eq!(
            protocol_derivatives(&Vector2::zeros(), 5.0, &gain),
            (0.0, 0.0)
        );
        let (rho_dot, u) = protocol_derivatives(&Vector2::new(1.0, 0.0), 2.0, &gain);
        assert_relative_eq!(rho_dot, 1.0, epsilon = 1e-14);
        assert_relative_eq!(u, -2.0, epsilon = 1e-14);
        let (rho_dot, u) = protocol_derivatives(&Vector2::new(0.0, 1.0), 1.0, &gain);
        assert_relative_eq!(rho_dot, 3.0, epsilon = 1e-14);
        assert_relative_eq!(u, -(3.0f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn denormalize_scales_by_alpha() {
        assert_eq!(denormalize_control(-2.0, 1.0).unwrap(), -2.0);
        assert_eq!(denormalize_control(-2.0, 0.5).unwrap(), -1.0);
        assert_eq!(
            denormalize_control(-2.0, 0.0),
            Err(ProtocolError::NonpositiveAlpha { alpha: 0.0 })
        );
        assert!(denormalize_control(1.0, -3.0).is_err());
    }

    #[test]
    fn reference_tracking_fixed_point_is_silent() {
        // every agent at the reference and all transmissions agreeing
        let x_ref = Vector2::new(4.0, 0.0);
        let neighbors = vec![(1, 1.0, x_ref), (2, 0.5, x_ref)];
        let zeta = compute_zeta(0, &x_ref, &neighbors, 1, &x_ref);
        assert_eq!(zeta, Vector2::zeros());
        let (rho_dot, u) = protocol_derivatives(&zeta, 7.0, &sqrt3_gain());
        assert_eq!((rho_dot, u), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn rho_dot_is_never_negative(
            z1 in -100.0f64..100.0,
            z2 in -100.0f64..100.0,
            rho in 0.0f64..50.0,
        ) {
            let (rho_dot, _) = protocol_derivatives(&Vector2::new(z1, z2), rho, &sqrt3_gain());
            prop_assert!(rho_dot >= 0.0);
        }

        #[test]
        fn zeta_is_linear_in_disagreement(
            own in -5.0f64..5.0,
            nbr in -5.0f64..5.0,
            w in 0.0f64..3.0,
            c in 0.1f64..4.0,
        ) {
            let x = Vector2::new(own, 0.0);
            let xj = Vector2::new(nbr, 0.0);
            let base = compute_zeta(0, &x, &[(1, w, xj)], 0, &Vector2::zeros());
            let scaled = compute_zeta(0, &(x * c), &[(1, w, xj * c)], 0, &Vector2::zeros());
            prop_assert!((scaled - base * c).norm() <= 1e-10);
        }
    }
}
