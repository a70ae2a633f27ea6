//! Reduced physical layer: normalized double-integrator agents, the
//! participation-factor bookkeeping, the lead agent's pilot-bus PI
//! reference generator, and a linear sensitivity surrogate for the
//! pilot-bus voltage.
//!
//! The surrogate keeps the control-relevant feedback path (reactive
//! injections raise the pilot voltage) without an EMT network model:
//! `V_pilot(t) = V_open(t) + sum_i s_i dQ_i(t)`, with `V_open` a
//! piecewise-constant trajectory that carries load-step disturbances.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("expected {expected} per-agent values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Physical-layer parameters. Droop gains `m_i` (V/Var) and
/// participation factors `alpha_i = 1/m_i` are redundant; the scenario
/// loader fills whichever is missing, so both vectors are populated on a
/// validated config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub agent_count: usize,
    #[serde(default)]
    pub droop_gains: Vec<f64>,
    #[serde(default)]
    pub participation_factors: Vec<f64>,
    /// Pilot-bus volts per Var injected by each agent.
    pub sensitivities: Vec<f64>,
    pub v_ref: f64,
    /// PI gains of the reference generator, Var/V and Var/(V*s).
    pub kp: f64,
    pub ki: f64,
    /// Piecewise-constant open-loop pilot voltage as `[t_s, volts]`
    /// breakpoints; the first breakpoint must sit at t = 0.
    pub v_open: Vec<(f64, f64)>,
    /// Static droop response only, no cooperative control.
    #[serde(default)]
    pub droop_only: bool,
}

impl PlantConfig {
    /// Open-loop pilot voltage at `t`: the last breakpoint at or before.
    pub fn open_loop_voltage(&self, t: f64) -> f64 {
        let mut v = self.v_open.first().map(|&(_, v)| v).unwrap_or(0.0);
        for &(t_k, v_k) in &self.v_open {
            if t_k <= t {
                v = v_k;
            } else {
                break;
            }
        }
        v
    }

    /// Static droop equilibrium at `t`, ignoring the cooperative layer:
    /// each agent responds `dQ_i = (V_ref - V_pilot)/m_i`, solved
    /// self-consistently with the sensitivity model. Returns the pilot
    /// voltage and the per-agent injections.
    pub fn droop_response(&self, t: f64) -> (f64, Vec<f64>) {
        let k: f64 = self
            .sensitivities
            .iter()
            .zip(&self.droop_gains)
            .map(|(s, m)| s / m)
            .sum();
        let v_pilot = (self.open_loop_voltage(t) + k * self.v_ref) / (1.0 + k);
        let d_q = self
            .droop_gains
            .iter()
            .map(|m| (self.v_ref - v_pilot) / m)
            .collect();
        (v_pilot, d_q)
    }
}

/// Lead agent's PI reference generator state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceState {
    /// Integral of the pilot-bus voltage error, V*s.
    pub integral_error: f64,
    /// Current normalized reactive-power reference, Var.
    pub dq_ref: f64,
}

/// Normalized double-integrator agent: `x_dot = A x + B u` with
/// `A = [[0, 1], [0, 0]]` and `B = [0, 1]^T`.
pub fn agent_dynamics(x: &Vector2<f64>, u: f64) -> Vector2<f64> {
    Vector2::new(x[1], u)
}

/// Pilot-bus voltage under the linear sensitivity surrogate.
pub fn pilot_voltage(config: &PlantConfig, d_q: &[f64], t: f64) -> Result<f64, PlantError> {
    if d_q.len() != config.agent_count {
        return Err(PlantError::LengthMismatch {
            expected: config.agent_count,
            got: d_q.len(),
        });
    }
    let injected: f64 = config
        .sensitivities
        .iter()
        .zip(d_q)
        .map(|(s, q)| s * q)
        .sum();
    Ok(config.open_loop_voltage(t) + injected)
}

/// One explicit-Euler update of the PI reference law
/// `dQ_ref = Kp e + Ki int(e)` with `e = V_pilot - V_ref`. Disabled
/// (pre-activation) the state is left untouched and the reference is 0.
/// The sim engine embeds the same law in its Runge-Kutta stages; this
/// explicit form is the unit-testable single-step reading.
pub fn reference_step(
    state: &ReferenceState,
    v_pilot: f64,
    v_ref: f64,
    kp: f64,
    ki: f64,
    dt: f64,
    enabled: bool,
) -> ReferenceState {
    assert!(dt > 0.0, "step size must be positive");
    if !enabled {
        return ReferenceState {
            integral_error: state.integral_error,
            dq_ref: 0.0,
        };
    }
    let e = v_pilot - v_ref;
    let integral_error = state.integral_error + e * dt;
    ReferenceState {
        integral_error,
        dq_ref: kp * e + ki * integral_error,
    }
}

/// Per-agent regulation errors `e_i = x1^i - dQ_ref`. States are
/// normalized by the participation factor, so equal normalized states
/// share reactive power proportionally to `alpha`.
pub fn regulation_errors(x: &[Vector2<f64>], dq_ref: f64) -> Vec<f64> {
    x.iter().map(|xi| xi[0] - dq_ref).collect()
}
