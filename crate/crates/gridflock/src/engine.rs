//! Deterministic fixed-step integration of the coupled
//! agent/protocol/plant system with per-link constant delays.
//!
//! The stacked state is one flat vector `[x^0, ..., x^{N-1}, rho^0, ...,
//! rho^{N-1}, z]` (agent states interleaved as x1, x2; `z` is the lead
//! PI's integral error) advanced by classical RK4. Topology, loss
//! processes, and link noise are evaluated at the stage times; delayed
//! neighbor states come from per-agent history buffers holding committed
//! grid samples, interpolated linearly. Events fire at the step boundary
//! that closes the interval containing them.

use std::collections::VecDeque;

use nalgebra::{DVector, Matrix2, Vector2};
use thiserror::Error;

use crate::graph::{transmit, EventBoundary, TopologyEventKind};
use crate::linalg::solve_care;
use crate::plant::pilot_voltage;
use crate::protocol::{compute_zeta, protocol_derivatives, ProtocolGain};
use crate::scenario::{self, ScenarioConfig};
use crate::trace::SimTrace;

/// Committed values beyond this magnitude end the run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Slack for delayed-state queries that land ahead of the newest sample
/// by floating-point dust only.
const FUTURE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("delayed-state query at t = {t_query} s is ahead of the newest history sample at t = {newest} s")]
    FutureQuery { t_query: f64, newest: f64 },
    #[error("state left the finite range at t = {t_s} s ({detail})")]
    NonfiniteState { t_s: f64, detail: String },
    #[error("scenario rejected by the engine: {reason}")]
    ConfigInvalid { reason: String },
}

/// Ring of `(t, x)` samples for one agent, spanning at least the
/// largest link delay. Queries below the oldest sample return the
/// initial-history value (constant pre-history).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    samples: VecDeque<(f64, Vector2<f64>)>,
    span_s: f64,
}

impl HistoryBuffer {
    /// Starts the buffer with the initial value as the t = 0 sample.
    pub fn new(initial: Vector2<f64>, span_s: f64) -> Self {
        assert!(span_s > 0.0, "history span must be positive");
        let mut samples = VecDeque::new();
        samples.push_back((0.0, initial));
        HistoryBuffer { samples, span_s }
    }

    pub fn newest_time(&self) -> f64 {
        self.samples.back().expect("buffer is never empty").0
    }

    /// Appends a committed sample; times must be strictly increasing.
    /// Samples older than the span are evicted, always keeping one
    /// sample at or below the horizon so queries stay bracketed.
    pub fn push(&mut self, t: f64, x: Vector2<f64>) {
        assert!(
            t > self.newest_time(),
            "history samples must be strictly increasing in t"
        );
        self.samples.push_back((t, x));
        while self.samples.len() >= 2 && self.samples[1].0 <= t - self.span_s {
            self.samples.pop_front();
        }
    }

    /// State at `t_query` by linear interpolation between the
    /// bracketing samples. Exact sample hits return that sample;
    /// queries at or before the oldest sample return it unchanged.
    pub fn delayed_state(&self, t_query: f64) -> Result<Vector2<f64>, EngineError> {
        let &(newest_t, newest_x) = self.samples.back().expect("buffer is never empty");
        if t_query > newest_t + FUTURE_EPS {
            return Err(EngineError::FutureQuery {
                t_query,
                newest: newest_t,
            });
        }
        if t_query >= newest_t {
            return Ok(newest_x);
        }
        let &(oldest_t, oldest_x) = self.samples.front().expect("buffer is never empty");
        if t_query <= oldest_t {
            return Ok(oldest_x);
        }
        let hi = self.samples.partition_point(|&(t, _)| t <= t_query);
        let (t0, x0) = self.samples[hi - 1];
        let (t1, x1) = self.samples[hi];
        let frac = (t_query - t0) / (t1 - t0);
        Ok(x0 + (x1 - x0) * frac)
    }
}

/// Mutable integration state: the flat stacked vector, per-agent frozen
/// commands of isolated agents, and the delay history buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step_index: u64,
    /// `[x1^0, x2^0, ..., x1^{N-1}, x2^{N-1}, rho^0..rho^{N-1}, z]`.
    pub y: DVector<f64>,
    /// `Some(u)` once an agent has been isolated; it then applies this
    /// command forever and its gain stops adapting.
    pub frozen_u: Vec<Option<f64>>,
    pub histories: Vec<HistoryBuffer>,
}

impl SimState {
    pub fn agent_count(&self) -> usize {
        (self.y.len() - 1) / 3
    }

    pub fn agent_x(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.y[2 * i], self.y[2 * i + 1])
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.y[2 * self.agent_count() + i]
    }

    pub fn integral_error(&self) -> f64 {
        self.y[self.y.len() - 1]
    }
}

/// One classical RK4 step. The stage function receives the stage index
/// (0..4) alongside the stage time so callers can key per-stage
/// stochastic draws; stages 1 and 2 share the midpoint time.
pub fn rk4_step<E, F>(mut f: F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>, E>
where
    F: FnMut(usize, f64, &DVector<f64>) -> Result<DVector<f64>, E>,
{
    let k1 = f(0, t, y)?;
    let k2 = f(1, t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(2, t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(3, t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

struct FieldEval {
    dy: DVector<f64>,
    u: Vec<f64>,
    v_pilot: f64,
    dq_ref: f64,
}

/// Prepared simulation of one scenario: the validated config plus the
/// Riccati gain derived from its design weight.
pub struct Engine {
    scenario: ScenarioConfig,
    gain: ProtocolGain,
    n_steps: u64,
}

impl Engine {
    /// Validates the scenario and solves the gain design. Fails with
    /// `ConfigInvalid` on any constraint violation.
    pub fn new(config: &ScenarioConfig) -> Result<Engine, EngineError> {
        scenario::validate(config).map_err(|e| EngineError::ConfigInvalid {
            reason: e.to_string(),
        })?;
        let (a, b) = crate::linalg::care::double_integrator();
        let solution = solve_care(&a, &b, &config.design_weight()).map_err(|e| {
            EngineError::ConfigInvalid {
                reason: format!("gain design failed: {e}"),
            }
        })?;
        let n_steps = (config.solver.t_end_s / config.solver.dt_s).round() as u64;
        Ok(Engine {
            scenario: config.clone(),
            gain: ProtocolGain::from_care(&solution),
            n_steps,
        })
    }

    pub fn gain(&self) -> &ProtocolGain {
        &self.gain
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    /// State at t = 0 from the configured initial conditions.
    pub fn initial_state(&self) -> SimState {
        let n = self.scenario.agent_count();
        let dt = self.scenario.solver.dt_s;
        let mut y = DVector::zeros(3 * n + 1);
        for (i, &(x1, x2)) in self.scenario.protocol.initial_x.iter().enumerate() {
            y[2 * i] = x1;
            y[2 * i + 1] = x2;
        }
        for (i, &r) in self.scenario.protocol.rho0.iter().enumerate() {
            y[2 * n + i] = r;
        }
        let span = self.scenario.graph.max_delay() + 2.0 * dt;
        let histories = (0..n)
            .map(|i| HistoryBuffer::new(Vector2::new(y[2 * i], y[2 * i + 1]), span))
            .collect();
        SimState {
            step_index: 0,
            y,
            frozen_u: vec![None; n],
            histories,
        }
    }

    /// Coupled derivative field at time `tt` for the stacked vector
    /// `y`, with link-noise draws keyed by `draw_counter`. `boundary`
    /// selects whether events at exactly `tt` are in effect, which the
    /// isolation handler uses to read the pre-event topology.
    fn field(
        &self,
        tt: f64,
        y: &DVector<f64>,
        frozen_u: &[Option<f64>],
        histories: &[HistoryBuffer],
        draw_counter: u64,
        boundary: EventBoundary,
    ) -> Result<FieldEval, EngineError> {
        let scenario = &self.scenario;
        let plant = &scenario.plant;
        let n = scenario.agent_count();
        let topo = scenario.graph.topology_at(tt, boundary);
        let x_of = |i: usize| Vector2::new(y[2 * i], y[2 * i + 1]);

        let d_q: Vec<f64> = (0..n)
            .map(|i| plant.participation_factors[i] * y[2 * i])
            .collect();
        let v_pilot = pilot_voltage(plant, &d_q, tt).expect("validated agent count");
        let e = v_pilot - plant.v_ref;
        let active = tt >= scenario.activation_t_s;
        let z = y[3 * n];
        let dq_ref = if active {
            plant.kp * e + plant.ki * z
        } else {
            0.0
        };
        let x_ref = Vector2::new(dq_ref, 0.0);

        let mut dy = DVector::zeros(3 * n + 1);
        let mut u_all = vec![0.0; n];
        let mut neighbors: Vec<(usize, f64, Vector2<f64>)> = Vec::with_capacity(n);
        for i in 0..n {
            let u = if let Some(frozen) = frozen_u[i] {
                frozen
            } else if !active {
                0.0
            } else {
                neighbors.clear();
                for (j, history) in histories.iter().enumerate() {
                    let weight = topo.weights[(i, j)];
                    if weight > 0.0 {
                        let delay = topo.delays[(i, j)];
                        let x_j = if delay > 0.0 {
                            history.delayed_state(tt - delay)?
                        } else {
                            x_of(j)
                        };
                        let received = transmit(
                            &x_j,
                            scenario.graph.noise_on(i, j),
                            scenario.solver.seed,
                            i,
                            j,
                            draw_counter,
                        );
                        neighbors.push((j, weight, received));
                    }
                }
                let zeta = compute_zeta(i, &x_of(i), &neighbors, topo.flags[i], &x_ref);
                let (rho_dot, u_i) = protocol_derivatives(&zeta, y[2 * n + i], &self.gain);
                if !scenario.solver.freeze_rho {
                    dy[2 * n + i] = rho_dot;
                }
                u_i
            };
            u_all[i] = u;
            dy[2 * i] = y[2 * i + 1];
            dy[2 * i + 1] = u;
        }
        dy[3 * n] = if active { e } else { 0.0 };
        Ok(FieldEval {
            dy,
            u: u_all,
            v_pilot,
            dq_ref,
        })
    }

    /// Advances the state by one RK4 step, commits the history sample,
    /// runs the divergence guard, and applies isolation events that
    /// fall in `(t, t + dt]` (freezing each agent's command from the
    /// pre-event topology at the committed boundary state).
    pub fn step(&self, state: &mut SimState) -> Result<(), EngineError> {
        let dt = self.scenario.solver.dt_s;
        let n = self.scenario.agent_count();
        let k = state.step_index;
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;

        let y_next = {
            let frozen_u = &state.frozen_u;
            let histories = &state.histories;
            rk4_step(
                |stage, tt, y| {
                    self.field(
                        tt,
                        y,
                        frozen_u,
                        histories,
                        k * 4 + stage as u64,
                        EventBoundary::Inclusive,
                    )
                    .map(|eval| eval.dy)
                },
                t,
                &state.y,
                dt,
            )?
        };
        state.y = y_next;
        state.step_index = k + 1;
        for i in 0..n {
            let x = state.agent_x(i);
            state.histories[i].push(t_next, x);
        }

        for (idx, &v) in state.y.iter().enumerate() {
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                let detail = if idx < 2 * n {
                    format!("agent {} state component {}", idx / 2, idx % 2 + 1)
                } else if idx < 3 * n {
                    format!("agent {} adaptive gain", idx - 2 * n)
                } else {
                    "reference integral error".to_string()
                };
                return Err(EngineError::NonfiniteState {
                    t_s: t_next,
                    detail,
                });
            }
        }

        for ev in &self.scenario.graph.events {
            if let TopologyEventKind::IsolateAgent { agent } = ev.kind {
                if t < ev.t_s && ev.t_s <= t_next && state.frozen_u[agent].is_none() {
                    let eval = self.field(
                        ev.t_s,
                        &state.y,
                        &state.frozen_u,
                        &state.histories,
                        (k + 1) * 4,
                        EventBoundary::Exclusive,
                    )?;
                    state.frozen_u[agent] = Some(eval.u[agent]);
                }
            }
        }
        Ok(())
    }

    /// Integrates the scenario from t = 0 to t_end and records every
    /// grid point. A divergence-guard trip does not error: the returned
    /// trace is truncated at the last finite sample and flagged.
    pub fn run(&self) -> Result<SimTrace, EngineError> {
        if self.scenario.plant.droop_only {
            return Ok(self.run_droop_only());
        }
        let dt = self.scenario.solver.dt_s;
        let mut state = self.initial_state();
        let mut trace = self.empty_trace();
        self.record(&mut trace, &state)?;
        for k in 0..self.n_steps {
            let t = k as f64 * dt;
            let t_next = (k + 1) as f64 * dt;
            match self.step(&mut state) {
                Ok(()) => {
                    self.log_events(&mut trace, &state, t, t_next);
                    self.record(&mut trace, &state)?;
                }
                Err(EngineError::NonfiniteState { t_s, detail }) => {
                    trace.diverged = true;
                    trace
                        .events
                        .push(format!("t={t_s}: divergence guard tripped: {detail}"));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        trace.v_lyap = lyapunov_monitor(&trace, &self.gain.p);
        Ok(trace)
    }

    fn empty_trace(&self) -> SimTrace {
        SimTrace {
            dt_s: self.scenario.solver.dt_s,
            t: Vec::new(),
            x: Vec::new(),
            rho: Vec::new(),
            u: Vec::new(),
            d_q: Vec::new(),
            v_pilot: Vec::new(),
            dq_ref: Vec::new(),
            v_lyap: Vec::new(),
            events: Vec::new(),
            diverged: false,
        }
    }

    /// Appends the committed state as a trace row. Instantaneous
    /// quantities (u, V_pilot, dQ_ref) come from a stage-0 field
    /// evaluation at the grid point, so they match what the next step's
    /// first stage sees.
    fn record(&self, trace: &mut SimTrace, state: &SimState) -> Result<(), EngineError> {
        let n = self.scenario.agent_count();
        let t = state.step_index as f64 * self.scenario.solver.dt_s;
        let eval = self.field(
            t,
            &state.y,
            &state.frozen_u,
            &state.histories,
            state.step_index * 4,
            EventBoundary::Inclusive,
        )?;
        trace.t.push(t);
        trace.x.push((0..n).map(|i| state.agent_x(i)).collect());
        trace.rho.push((0..n).map(|i| state.rho(i)).collect());
        trace.u.push(eval.u);
        trace.d_q.push(
            (0..n)
                .map(|i| self.scenario.plant.participation_factors[i] * state.y[2 * i])
                .collect(),
        );
        trace.v_pilot.push(eval.v_pilot);
        trace.dq_ref.push(eval.dq_ref);
        Ok(())
    }

    fn log_events(&self, trace: &mut SimTrace, state: &SimState, t: f64, t_next: f64) {
        for ev in &self.scenario.graph.events {
            if t < ev.t_s && ev.t_s <= t_next {
                let line = match ev.kind {
                    TopologyEventKind::AddEdge {
                        i,
                        j,
                        weight,
                        delay_s,
                    } => {
                        format!(
                            "t={}: add_edge ({i}, {j}) weight={weight} delay_s={delay_s}",
                            ev.t_s
                        )
                    }
                    TopologyEventKind::RemoveEdge { i, j } => {
                        format!("t={}: remove_edge ({i}, {j})", ev.t_s)
                    }
                    TopologyEventKind::ReweightEdge { i, j, weight } => {
                        format!("t={}: reweight_edge ({i}, {j}) weight={weight}", ev.t_s)
                    }
                    TopologyEventKind::IsolateAgent { agent } => {
                        let u = state.frozen_u[agent].unwrap_or(0.0);
                        format!(
                            "t={}: isolate_agent {agent}, command frozen at {u:e}",
                            ev.t_s
                        )
                    }
                };
                trace.events.push(line);
            }
        }
    }

    /// Static droop response sampled on the grid: no cooperative
    /// control, injections from the droop law solved against the
    /// sensitivity model at each instant.
    fn run_droop_only(&self) -> SimTrace {
        let n = self.scenario.agent_count();
        let plant = &self.scenario.plant;
        let dt = self.scenario.solver.dt_s;
        let mut trace = self.empty_trace();
        for k in 0..=self.n_steps {
            let t = k as f64 * dt;
            let (v_pilot, d_q) = plant.droop_response(t);
            trace.t.push(t);
            trace.x.push(
                (0..n)
                    .map(|i| Vector2::new(d_q[i] * plant.droop_gains[i], 0.0))
                    .collect(),
            );
            trace.rho.push(self.scenario.protocol.rho0.clone());
            trace.u.push(vec![0.0; n]);
            trace.d_q.push(d_q);
            trace.v_pilot.push(v_pilot);
            trace.dq_ref.push(0.0);
        }
        trace.v_lyap = lyapunov_monitor(&trace, &self.gain.p);
        trace
    }
}

/// Builds the engine and integrates the scenario end to end.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace, EngineError> {
    Engine::new(config)?.run()
}

/// Lyapunov monitor `V(t) = sum_i xbar_i' P xbar_i / rho_i` with
/// `xbar_i = x_i - [dQ_ref, 0]`, evaluated pointwise on a stored trace.
/// Samples where any agent's gain is nonpositive are absent.
pub fn lyapunov_monitor(trace: &SimTrace, p: &Matrix2<f64>) -> Vec<Option<f64>> {
    (0..trace.rows())
        .map(|row| {
            let x_ref = Vector2::new(trace.dq_ref[row], 0.0);
            let mut v = 0.0;
            for agent in 0..trace.agent_count() {
                let rho = trace.rho[row][agent];
                if rho <= 0.0 {
                    return None;
                }
                let xbar = trace.x[row][agent] - x_ref;
                v += (xbar.transpose() * p * xbar)[(0, 0)] / rho;
            }
            Some(v)
        })
        .collect()
}
