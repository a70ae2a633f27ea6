//! Time-varying weighted undirected communication topology.
//!
//! A [`GraphSchedule`] is an immutable description of the network: base
//! edges with weights and per-link delays, per-agent reference-access
//! flags, a time-ordered event list (edge add/remove/reweight, agent
//! isolation), periodic link-loss processes, and per-edge multiplicative
//! noise. Evaluation at a time instant is pure, so schedules can be
//! shared freely across threads.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, RealMatrix};
use crate::rng::uniform_symmetric;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("adjacency matrix is not symmetric: max |W_ij - W_ji| = {max_asymmetry:.3e}")]
    AsymmetricAdjacency { max_asymmetry: f64 },
}

/// Undirected weighted edge with a constant transport delay.
/// Serialized as the array `[i, j, weight, delay_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64, f64)", into = "(usize, usize, f64, f64)")]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub delay_s: f64,
}

impl From<(usize, usize, f64, f64)> for Edge {
    fn from(t: (usize, usize, f64, f64)) -> Self {
        Edge {
            i: t.0,
            j: t.1,
            weight: t.2,
            delay_s: t.3,
        }
    }
}

impl From<Edge> for (usize, usize, f64, f64) {
    fn from(e: Edge) -> Self {
        (e.i, e.j, e.weight, e.delay_s)
    }
}

/// One topology change, applied from `t_s` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub kind: TopologyEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyEventKind {
    AddEdge {
        i: usize,
        j: usize,
        weight: f64,
        delay_s: f64,
    },
    RemoveEdge {
        i: usize,
        j: usize,
    },
    ReweightEdge {
        i: usize,
        j: usize,
        weight: f64,
    },
    /// Cuts every link of the agent and clears its reference flag. The
    /// sim engine additionally freezes the agent's last control command.
    IsolateAgent {
        agent: usize,
    },
}

/// Periodic ON/OFF process on one link: the link is present while
/// `((t - phase) mod period) / period < duty`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossProcess {
    pub i: usize,
    pub j: usize,
    pub period_s: f64,
    #[serde(default = "default_duty")]
    pub duty: f64,
    #[serde(default)]
    pub phase_s: f64,
}

pub(crate) fn default_duty() -> f64 {
    0.5
}

impl LossProcess {
    /// Whether the link is present at time `t`.
    pub fn is_on(&self, t: f64) -> bool {
        let frac = (t - self.phase_s).rem_euclid(self.period_s) / self.period_s;
        frac < self.duty
    }
}

/// Multiplicative noise on the states transported over one edge.
/// A `None` seed defers to the scenario's solver seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProcess {
    pub i: usize,
    pub j: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Piecewise specification of the communication network over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSchedule {
    pub edges: Vec<Edge>,
    /// Per-agent reference-access flag, 1 for lead agents.
    pub reference_flags: Vec<u8>,
    #[serde(default)]
    pub events: Vec<TopologyEvent>,
    #[serde(default)]
    pub loss: Vec<LossProcess>,
    #[serde(default)]
    pub noise: Vec<NoiseProcess>,
}

/// Whether events at exactly the query time take effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventBoundary {
    Inclusive,
    Exclusive,
}

/// Snapshot of the network at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Symmetric weight matrix with zero diagonal.
    pub weights: RealMatrix,
    /// Per-link delays, symmetric, zero where no link exists.
    pub delays: RealMatrix,
    /// Reference flags with isolated agents cleared.
    pub flags: Vec<u8>,
    /// True for agents hit by an isolation event so far.
    pub isolated: Vec<bool>,
}

impl GraphSchedule {
    pub fn agent_count(&self) -> usize {
        self.reference_flags.len()
    }

    /// Noise process covering the unordered pair `{a, b}`, if any.
    pub fn noise_on(&self, a: usize, b: usize) -> Option<&NoiseProcess> {
        self.noise
            .iter()
            .find(|n| (n.i == a && n.j == b) || (n.i == b && n.j == a))
    }

    /// Largest link delay that can ever be in effect.
    pub fn max_delay(&self) -> f64 {
        let base = self.edges.iter().map(|e| e.delay_s);
        let added = self.events.iter().filter_map(|ev| match ev.kind {
            TopologyEventKind::AddEdge { delay_s, .. } => Some(delay_s),
            _ => None,
        });
        base.chain(added).fold(0.0, f64::max)
    }

    /// Full network snapshot at time `t`: the persistent topology with
    /// the instantaneous loss-process masks applied on top.
    pub fn topology_at(&self, t: f64, boundary: EventBoundary) -> Topology {
        let mut topo = self.persistent_topology_at(t, boundary);
        for loss in &self.loss {
            if !loss.is_on(t) {
                topo.weights[(loss.i, loss.j)] = 0.0;
                topo.weights[(loss.j, loss.i)] = 0.0;
            }
        }
        topo
    }

    /// Durable network at time `t`: the base edges with every event up
    /// to `t` applied, ignoring the transient loss processes. This is
    /// the topology a frozen-loop analysis should reason about.
    pub fn persistent_topology_at(&self, t: f64, boundary: EventBoundary) -> Topology {
        let n = self.agent_count();
        let mut weights = RealMatrix::zeros(n, n);
        let mut delays = RealMatrix::zeros(n, n);
        let mut flags = self.reference_flags.clone();
        let mut isolated = vec![false; n];

        let set_link = |w: &mut RealMatrix,
                        d: &mut RealMatrix,
                        i: usize,
                        j: usize,
                        weight: f64,
                        delay: f64| {
            w[(i, j)] = weight;
            w[(j, i)] = weight;
            d[(i, j)] = delay;
            d[(j, i)] = delay;
        };
        for e in &self.edges {
            set_link(&mut weights, &mut delays, e.i, e.j, e.weight, e.delay_s);
        }
        for ev in &self.events {
            let fires = match boundary {
                EventBoundary::Inclusive => ev.t_s <= t,
                EventBoundary::Exclusive => ev.t_s < t,
            };
            if !fires {
                continue;
            }
            match ev.kind {
                TopologyEventKind::AddEdge {
                    i,
                    j,
                    weight,
                    delay_s,
                } => {
                    set_link(&mut weights, &mut delays, i, j, weight, delay_s);
                }
                TopologyEventKind::RemoveEdge { i, j } => {
                    set_link(&mut weights, &mut delays, i, j, 0.0, 0.0);
                }
                TopologyEventKind::ReweightEdge { i, j, weight } => {
                    weights[(i, j)] = weight;
                    weights[(j, i)] = weight;
                }
                TopologyEventKind::IsolateAgent { agent } => {
                    for k in 0..n {
                        weights[(agent, k)] = 0.0;
                        weights[(k, agent)] = 0.0;
                    }
                    flags[agent] = 0;
                    isolated[agent] = true;
                }
            }
        }
        Topology {
            weights,
            delays,
            flags,
            isolated,
        }
    }
}

/// Adjacency matrix `a_ij(t)` with all events and loss processes
/// effective at `t` applied.
pub fn adjacency_at(schedule: &GraphSchedule, t: f64) -> RealMatrix {
    schedule.topology_at(t, EventBoundary::Inclusive).weights
}

/// Reference flags at `t`, with isolated agents cleared.
pub fn flags_at(schedule: &GraphSchedule, t: f64) -> Vec<u8> {
    schedule.topology_at(t, EventBoundary::Inclusive).flags
}

/// Graph Laplacian: `l_ii = sum_k a_ik`, `l_ij = -a_ij`.
pub fn laplacian(adjacency: &RealMatrix) -> Result<RealMatrix, GraphError> {
    let n = adjacency.nrows();
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asymmetry = max_asymmetry.max((adjacency[(i, j)] - adjacency[(j, i)]).abs());
        }
    }
    if max_asymmetry > 1e-12 * adjacency.norm().max(1.0) {
        return Err(GraphError::AsymmetricAdjacency { max_asymmetry });
    }
    let mut l = -adjacency.clone();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let degree: f64 = (0..n).filter(|&j| j != i).map(|j| adjacency[(i, j)]).sum();
        l[(i, i)] = degree;
    }
    Ok(l)
}

/// Expanded Laplacian `Lbar = L + diag(flags)`.
pub fn expanded_laplacian(l: &RealMatrix, flags: &[u8]) -> RealMatrix {
    assert_eq!(
        l.nrows(),
        flags.len(),
        "flag count must match Laplacian dimension"
    );
    let mut lbar = l.clone();
    for (i, &f) in flags.iter().enumerate() {
        lbar[(i, i)] += f as f64;
    }
    lbar
}

/// Spectral bounds of the expanded Laplacian over a set of sample times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphBounds {
    /// Smallest eigenvalue of `Lbar(t)` over the samples.
    pub beta: f64,
    /// Largest eigenvalue of `Lbar(t)` over the samples.
    pub gamma: f64,
    /// True iff `beta` is strictly positive (above a roundoff floor).
    pub pass: bool,
}

/// Evaluates `beta = min lambda_min(Lbar(t))` and `gamma = max
/// lambda_max(Lbar(t))` over the sample times. For piecewise-constant
/// schedules one sample per constant interval makes this exact. The pass
/// verdict uses a roundoff floor of `1e-12 * max(1, gamma)` so an exact
/// zero eigenvalue never passes on numerical fuzz.
pub fn check_bounds(schedule: &GraphSchedule, sample_times: &[f64]) -> GraphBounds {
    assert!(!sample_times.is_empty(), "need at least one sample time");
    let mut beta = f64::INFINITY;
    let mut gamma = f64::NEG_INFINITY;
    for &t in sample_times {
        let topo = schedule.topology_at(t, EventBoundary::Inclusive);
        let l = laplacian(&topo.weights).expect("constructed adjacency is symmetric");
        let lbar = expanded_laplacian(&l, &topo.flags);
        let eigs = symmetric_eigenvalues(&lbar).expect("Lbar is symmetric");
        beta = beta.min(eigs[0]);
        gamma = gamma.max(*eigs.last().expect("nonempty spectrum"));
    }
    let pass = beta > 1e-12 * gamma.max(1.0);
    GraphBounds { beta, gamma, pass }
}

/// State as received over a link: `(1 + eta) x` with `eta` drawn
/// deterministically from `Uniform(-amplitude, amplitude)`.
///
/// The draw is keyed on `(seed, receiver, sender, draw_index)`, so the
/// two directions of an edge see independent noise and a repeated
/// evaluation of the same logical sample is bit-identical. With no noise
/// process (or zero amplitude) the state passes through unchanged.
pub fn transmit(
    state: &Vector2<f64>,
    noise: Option<&NoiseProcess>,
    fallback_seed: u64,
    receiver: usize,
    sender: usize,
    draw_index: u64,
) -> Vector2<f64> {
    match noise {
        Some(n) if n.amplitude > 0.0 => {
            let seed = n.seed.unwrap_or(fallback_seed);
            let eta = uniform_symmetric(
                seed,
                receiver as u64,
                sender as u64,
                draw_index,
                n.amplitude,
            );
            state * (1.0 + eta)
        }
        _ => *state,
    }
}

/// Ring topology over `n` agents with uniform weight and delay.
pub fn ring_edges(n: usize, weight: f64, delay_s: f64) -> Vec<Edge> {
    (0..n)
        .map(|i| Edge {
            i,
            j: (i + 1) % n,
            weight,
            delay_s,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ring4() -> GraphSchedule {
        GraphSchedule {
            edges: ring_edges(4, 1.0, 0.0),
            reference_flags: vec![1, 0, 0, 0],
            events: vec![],
            loss: vec![],
            noise: vec![],
        }
    }

    #[test]
    fn ring_adjacency_has_unit_neighbors() {
        let w = adjacency_at(&ring4(), 1.23);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i + 1) % 4 == j || (j + 1) % 4 == i {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(w[(i, j)], expected, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn loss_process_toggles_link() {
        let mut schedule = ring4();
        schedule.loss = vec![LossProcess {
            i: 2,
            j: 3,
            period_s: 0.1,
            duty: 0.5,
            phase_s: 0.0,
        }];
        assert_eq!(adjacency_at(&schedule, 0.02)[(2, 3)], 1.0);
        assert_eq!(adjacency_at(&schedule, 0.07)[(2, 3)], 0.0);
        // other links untouched
        assert_eq!(adjacency_at(&schedule, 0.07)[(0, 1)], 1.0);
    }

    #[test]
    fn persistent_topology_ignores_loss_but_keeps_events() {
        let mut schedule = ring4();
        schedule.loss = vec![LossProcess {
            i: 2,
            j: 3,
            period_s: 0.1,
            duty: 0.5,
            phase_s: 0.0,
        }];
        schedule.events = vec![TopologyEvent {
            t_s: 0.05,
            kind: TopologyEventKind::RemoveEdge { i: 0, j: 1 },
        }];
        // t = 0.07: link (2,3) is in its lost half-period
        let masked = schedule.topology_at(0.07, EventBoundary::Inclusive);
        let durable = schedule.persistent_topology_at(0.07, EventBoundary::Inclusive);
        assert_eq!(masked.weights[(2, 3)], 0.0);
        assert_eq!(durable.weights[(2, 3)], 1.0);
        // the removal event binds in both views
        assert_eq!(masked.weights[(0, 1)], 0.0);
        assert_eq!(durable.weights[(0, 1)], 0.0);
    }

    #[test]
    fn isolation_zeroes_row_and_column() {
        let mut schedule = ring4();
        schedule.events = vec![TopologyEvent {
            t_s: 0.6,
            kind: TopologyEventKind::IsolateAgent { agent: 3 },
        }];
        let before = adjacency_at(&schedule, 0.599);
        assert_eq!(before[(3, 0)], 1.0);
        for t in [0.6, 0.75, 2.0] {
            let w = adjacency_at(&schedule, t);
            for k in 0..4 {
                assert_eq!(w[(3, k)], 0.0);
                assert_eq!(w[(k, 3)], 0.0);
            }
        }
        assert_eq!(flags_at(&schedule, 0.6)[3], 0);
    }

    #[test]
    fn event_boundary_modes_differ_at_the_instant() {
        let mut schedule = ring4();
        schedule.events = vec![TopologyEvent {
            t_s: 0.6,
            kind: TopologyEventKind::RemoveEdge { i: 1, j: 2 },
        }];
        let strict = schedule.topology_at(0.6, EventBoundary::Exclusive);
        let inclusive = schedule.topology_at(0.6, EventBoundary::Inclusive);
        assert_eq!(strict.weights[(1, 2)], 1.0);
        assert_eq!(inclusive.weights[(1, 2)], 0.0);
    }

    #[test]
    fn ring_laplacian_matches_direct_construction() {
        let w = adjacency_at(&ring4(), 0.0);
        let l = laplacian(&w).unwrap();
        let expected = RealMatrix::from_row_slice(
            4,
            4,
            &[
                2.0, -1.0, 0.0, -1.0, -1.0, 2.0, -1.0, 0.0, 0.0, -1.0, 2.0, -1.0, -1.0, 0.0, -1.0,
                2.0,
            ],
        );
        assert_eq!(l, expected);
    }

    #[test]
    fn empty_graph_laplacian_is_zero() {
        let l = laplacian(&RealMatrix::zeros(3, 3)).unwrap();
        assert_eq!(l, RealMatrix::zeros(3, 3));
    }

    #[test]
    fn asymmetric_adjacency_is_rejected() {
        let w = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(
            laplacian(&w),
            Err(GraphError::AsymmetricAdjacency { .. })
        ));
    }

    #[test]
    fn expanded_laplacian_adds_flags_on_diagonal() {
        let w = adjacency_at(&ring4(), 0.0);
        let l = laplacian(&w).unwrap();
        let lbar = expanded_laplacian(&l, &[1, 0, 0, 0]);
        assert_eq!(lbar[(0, 0)], 3.0);
        assert_eq!(lbar[(1, 1)], 2.0);
        // characteristic polynomial x^4 - 9x^3 + 26x^2 - 26x + 4
        let eigs = symmetric_eigenvalues(&lbar).unwrap();
        let expected = [0.186393497351669, 2.0, 2.470683419871179, 4.342923082777165];
        for (got, want) in eigs.iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn expanded_laplacian_trivial_cases() {
        let l = laplacian(&adjacency_at(&ring4(), 0.0)).unwrap();
        assert_eq!(expanded_laplacian(&l, &[0, 0, 0, 0]), l);
        let single = expanded_laplacian(&RealMatrix::zeros(1, 1), &[1]);
        assert_eq!(single, RealMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn check_bounds_on_pinned_ring() {
        let bounds = check_bounds(&ring4(), &[0.0]);
        assert_relative_eq!(bounds.beta, 0.186393497351669, epsilon = 1e-9);
        assert_relative_eq!(bounds.gamma, 4.342923082777165, epsilon = 1e-9);
        assert!(bounds.pass);
    }

    #[test]
    fn check_bounds_fails_without_lead() {
        let mut schedule = ring4();
        schedule.reference_flags = vec![0, 0, 0, 0];
        let bounds = check_bounds(&schedule, &[0.0]);
        assert!(bounds.beta.abs() < 1e-9);
        assert!(!bounds.pass);
    }

    #[test]
    fn check_bounds_fails_after_isolation() {
        let mut schedule = ring4();
        schedule.events = vec![TopologyEvent {
            t_s: 0.6,
            kind: TopologyEventKind::IsolateAgent { agent: 3 },
        }];
        assert!(check_bounds(&schedule, &[0.5]).pass);
        let after = check_bounds(&schedule, &[0.7]);
        assert!(!after.pass, "isolated agent contributes a zero row");
    }

    #[test]
    fn transmit_without_noise_is_identity() {
        let x = Vector2::new(1.5, -2.0);
        assert_eq!(transmit(&x, None, 1, 0, 1, 7), x);
        let zero_amp = NoiseProcess {
            i: 0,
            j: 1,
            amplitude: 0.0,
            seed: Some(3),
        };
        assert_eq!(transmit(&x, Some(&zero_amp), 1, 0, 1, 7), x);
    }

    #[test]
    fn transmit_is_bounded_and_deterministic() {
        let noise = NoiseProcess {
            i: 0,
            j: 1,
            amplitude: 0.1,
            seed: Some(9),
        };
        let x = Vector2::new(2.0, -4.0);
        for draw in 0..500 {
            let a = transmit(&x, Some(&noise), 1, 0, 1, draw);
            let b = transmit(&x, Some(&noise), 1, 0, 1, draw);
            assert_eq!(a, b);
            for k in 0..2 {
                let ratio = a[k] / x[k];
                assert!(ratio > 0.9 && ratio < 1.1, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn noise_seed_falls_back_to_solver_seed() {
        let unseeded = NoiseProcess {
            i: 0,
            j: 1,
            amplitude: 0.1,
            seed: None,
        };
        let seeded = NoiseProcess {
            i: 0,
            j: 1,
            amplitude: 0.1,
            seed: Some(42),
        };
        let x = Vector2::new(1.0, 1.0);
        assert_eq!(
            transmit(&x, Some(&unseeded), 42, 0, 1, 3),
            transmit(&x, Some(&seeded), 0, 0, 1, 3)
        );
    }

    #[test]
    fn edge_serializes_as_array() {
        let e = Edge {
            i: 0,
            j: 1,
            weight: 1.0,
            delay_s: 0.02,
        };
        assert_eq!(serde_json::to_string(&e).unwrap(), "[0,1,1.0,0.02]");
        let back: Edge = serde_json::from_str("[0,1,1.0,0.02]").unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn event_serializes_tagged() {
        let ev = TopologyEvent {
            t_s: 0.8,
            kind: TopologyEventKind::RemoveEdge { i: 1, j: 2 },
        };
        let json = serde_json::to_string(&ev).unwrap();
        assert_eq!(json, r#"{"t_s":0.8,"kind":"remove_edge","i":1,"j":2}"#);
        let back: TopologyEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ev);
    }

    // random symmetric schedules for property checks
    fn arb_schedule() -> impl Strategy<Value = GraphSchedule> {
        (2usize..7).prop_flat_map(|n| {
            let edges = proptest::collection::vec(
                (0..n, 0..n, 0.1f64..3.0).prop_filter_map("self loop", |(i, j, w)| {
                    (i != j).then_some(Edge {
                        i,
                        j,
                        weight: w,
                        delay_s: 0.0,
                    })
                }),
                0..8,
            );
            let flags = proptest::collection::vec(0u8..2, n);
            (edges, flags).prop_map(|(edges, reference_flags)| GraphSchedule {
                edges,
                reference_flags,
                events: vec![],
                loss: vec![],
                noise: vec![],
            })
        })
    }

    // spanning tree plus extras, exactly one lead agent
    fn arb_connected_pinned() -> impl Strategy<Value = GraphSchedule> {
        (2usize..7).prop_flat_map(|n| {
            let tree = proptest::collection::vec(0.5f64..2.0, n - 1);
            let parents: Vec<_> = (1..n).map(|k| 0..k).collect();
            let lead = 0..n;
            (tree, parents, lead).prop_map(move |(weights, parents, lead)| {
                let edges = parents
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| Edge {
                        i: k + 1,
                        j: p,
                        weight: weights[k],
                        delay_s: 0.0,
                    })
                    .collect();
                let mut reference_flags = vec![0u8; n];
                reference_flags[lead] = 1;
                GraphSchedule {
                    edges,
                    reference_flags,
                    events: vec![],
                    loss: vec![],
                    noise: vec![],
                }
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_rows_sum_to_zero(schedule in arb_schedule(), t in 0.0f64..5.0) {
            let l = laplacian(&adjacency_at(&schedule, t)).unwrap();
            let n = l.nrows();
            for i in 0..n {
                let row_sum: f64 = (0..n).map(|j| l[(i, j)]).sum();
                prop_assert!(row_sum.abs() <= 1e-12, "row {i} sums to {row_sum}");
            }
            let eigs = symmetric_eigenvalues(&l).unwrap();
            prop_assert!(eigs[0] >= -1e-10, "Laplacian must be PSD, got {}", eigs[0]);
        }

        #[test]
        fn expanded_laplacian_never_lowers_spectrum(schedule in arb_schedule()) {
            let l = laplacian(&adjacency_at(&schedule, 0.0)).unwrap();
            let lbar = expanded_laplacian(&l, &schedule.reference_flags);
            let lo_l = symmetric_eigenvalues(&l).unwrap()[0];
            let lo_bar = symmetric_eigenvalues(&lbar).unwrap()[0];
            prop_assert!(lo_bar >= lo_l - 1e-10);
        }

        #[test]
        fn connected_pinned_graph_has_positive_beta(schedule in arb_connected_pinned()) {
            let bounds = check_bounds(&schedule, &[0.0]);
            prop_assert!(bounds.pass, "beta = {}", bounds.beta);
            prop_assert!(bounds.beta > 0.0);
            prop_assert!(bounds.gamma >= bounds.beta);
        }

        #[test]
        fn transmit_determinism(seed in any::<u64>(), draw in any::<u64>(), amp in 0.0f64..0.5) {
            let noise = NoiseProcess { i: 0, j: 1, amplitude: amp, seed: Some(seed) };
            let x = Vector2::new(1.0, -2.0);
            let a = transmit(&x, Some(&noise), 0, 0, 1, draw);
            let b = transmit(&x, Some(&noise), 0, 0, 1, draw);
            prop_assert_eq!(a, b);
        }
    }
}
