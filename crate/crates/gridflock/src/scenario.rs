//! Scenario configuration: JSON schema, validation, and the built-in
//! presets.
//!
//! A scenario file is a single JSON object with `plant`, `graph`,
//! `protocol`, `solver`, `activation_t_s`, and `outputs` sections.
//! Loading fills defaults (identity design weight, zero initial gains
//! and states, participation factors from droop gains, noise seeds from
//! the solver seed) and validates every cross-field constraint, so a
//! loaded config is fully materialized: serializing it back produces a
//! self-contained echo that reloads bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphSchedule;
use crate::linalg::{self, RealMatrix};
use crate::plant::PlantConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("scenario JSON is malformed: {detail}")]
    ParseError { detail: String },
    #[error("invalid scenario config at {field}: {reason}")]
    ValidationError { field: String, reason: String },
    #[error("{what} at t = {t_s} s is not on the dt = {dt_s} s grid")]
    GridMisaligned { what: String, t_s: f64, dt_s: f64 },
    #[error("unknown preset '{name}' (available: {})", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
}

pub const PRESET_NAMES: [&str; 4] = ["scenario1", "scenario2", "scenario3", "scenario4"];

/// Protocol design data: the CARE weight `M` and per-agent initial
/// conditions. Empty vectors mean "all zeros" and are materialized by
/// the loader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    #[serde(default = "identity_weight")]
    pub m: Vec<Vec<f64>>,
    #[serde(default)]
    pub rho0: Vec<f64>,
    #[serde(default)]
    pub initial_x: Vec<(f64, f64)>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            m: identity_weight(),
            rho0: Vec::new(),
            initial_x: Vec::new(),
        }
    }
}

fn identity_weight() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub t_end_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Hold every adaptive gain at its initial value (fixed-gain runs
    /// for oracle comparisons).
    #[serde(default)]
    pub freeze_rho: bool,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    #[serde(default = "default_true")]
    pub emit_trace: bool,
    #[serde(default = "default_true")]
    pub emit_summary: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_out_dir(),
            emit_trace: true,
            emit_summary: true,
        }
    }
}

fn default_out_dir() -> String {
    "out".to_string()
}

fn default_true() -> bool {
    true
}

fn default_schema_version() -> u32 {
    1
}

/// One complete, validated simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub plant: PlantConfig,
    pub graph: GraphSchedule,
    #[serde(default)]
    pub protocol: ProtocolSection,
    pub solver: SolverSection,
    /// Time at which the cooperative controller is enabled.
    pub activation_t_s: f64,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl ScenarioConfig {
    pub fn agent_count(&self) -> usize {
        self.plant.agent_count
    }

    /// Design weight as a matrix (validated 2x2 symmetric PD).
    pub fn design_weight(&self) -> RealMatrix {
        RealMatrix::from_fn(2, 2, |i, j| self.protocol.m[i][j])
    }
}

/// Loads, resolves, and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = parse_scenario_file(path)?;
    validate_and_resolve(&mut config)?;
    Ok(config)
}

/// Parses a scenario file without resolving defaults or validating;
/// callers that apply overrides do so before `validate_and_resolve`.
pub fn parse_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_scenario_str(&text)
}

/// Parses scenario JSON from a string (no resolution or validation).
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::ParseError {
        detail: e.to_string(),
    })
}

/// Fills cross-field defaults in place, then validates. Idempotent on
/// an already-resolved config.
pub fn validate_and_resolve(config: &mut ScenarioConfig) -> Result<(), ScenarioError> {
    resolve(config)?;
    validate(config)
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::ValidationError {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// True when `v` is provably greater than `floor`; NaN fails, so
/// validation rejects it.
fn exceeds(v: f64, floor: f64) -> bool {
    v.partial_cmp(&floor) == Some(std::cmp::Ordering::Greater)
}

fn resolve(config: &mut ScenarioConfig) -> Result<(), ScenarioError> {
    let n = config.plant.agent_count;
    let plant = &mut config.plant;
    match (
        plant.droop_gains.is_empty(),
        plant.participation_factors.is_empty(),
    ) {
        (true, true) => {
            return Err(invalid(
                "plant",
                "at least one of droop_gains and participation_factors is required",
            ));
        }
        (true, false) => {
            for (i, &a) in plant.participation_factors.iter().enumerate() {
                if a <= 0.0 {
                    return Err(invalid(
                        &format!("plant.participation_factors[{i}]"),
                        format!("must be positive, got {a}"),
                    ));
                }
            }
            plant.droop_gains = plant
                .participation_factors
                .iter()
                .map(|a| 1.0 / a)
                .collect();
        }
        (false, _) => {
            for (i, &m) in plant.droop_gains.iter().enumerate() {
                if m <= 0.0 {
                    return Err(invalid(
                        &format!("plant.droop_gains[{i}]"),
                        format!("must be positive, got {m}"),
                    ));
                }
            }
            if plant.participation_factors.is_empty() {
                plant.participation_factors = plant.droop_gains.iter().map(|m| 1.0 / m).collect();
            }
        }
    }
    if config.protocol.rho0.is_empty() {
        config.protocol.rho0 = vec![0.0; n];
    }
    if config.protocol.initial_x.is_empty() {
        config.protocol.initial_x = vec![(0.0, 0.0); n];
    }
    for noise in &mut config.graph.noise {
        if noise.seed.is_none() {
            noise.seed = Some(config.solver.seed);
        }
    }
    config.graph.events.sort_by(|a, b| {
        a.t_s
            .partial_cmp(&b.t_s)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(())
}

fn check_grid(what: &str, t_s: f64, dt_s: f64) -> Result<(), ScenarioError> {
    let steps = t_s / dt_s;
    if (steps - steps.round()).abs() > 1e-6 * steps.round().abs().max(1.0) {
        return Err(ScenarioError::GridMisaligned {
            what: what.to_string(),
            t_s,
            dt_s,
        });
    }
    Ok(())
}

/// Validates a resolved config. Field paths in errors use JSON-pointer
/// style dotted names.
pub fn validate(config: &ScenarioConfig) -> Result<(), ScenarioError> {
    if config.schema_version != 1 {
        return Err(invalid(
            "schema_version",
            format!("unsupported version {}, expected 1", config.schema_version),
        ));
    }
    let n = config.plant.agent_count;
    if n == 0 {
        return Err(invalid("plant.agent_count", "must be at least 1"));
    }
    let dt = config.solver.dt_s;
    if !exceeds(dt, 0.0) {
        return Err(invalid(
            "solver.dt_s",
            format!("must be positive, got {dt}"),
        ));
    }
    if config.activation_t_s < 0.0 {
        return Err(invalid("activation_t_s", "must be nonnegative"));
    }
    if !exceeds(config.solver.t_end_s, config.activation_t_s) {
        return Err(invalid(
            "solver.t_end_s",
            format!(
                "must exceed activation_t_s = {}, got {}",
                config.activation_t_s, config.solver.t_end_s
            ),
        ));
    }
    check_grid("solver.t_end_s", config.solver.t_end_s, dt)?;
    check_grid("activation_t_s", config.activation_t_s, dt)?;

    let plant = &config.plant;
    for (name, len) in [
        ("plant.droop_gains", plant.droop_gains.len()),
        (
            "plant.participation_factors",
            plant.participation_factors.len(),
        ),
        ("plant.sensitivities", plant.sensitivities.len()),
    ] {
        if len != n {
            return Err(invalid(name, format!("expected {n} entries, got {len}")));
        }
    }
    for (i, (&a, &m)) in plant
        .participation_factors
        .iter()
        .zip(&plant.droop_gains)
        .enumerate()
    {
        if a <= 0.0 {
            return Err(invalid(
                &format!("plant.participation_factors[{i}]"),
                "must be positive",
            ));
        }
        if (a * m - 1.0).abs() > 1e-12 {
            return Err(invalid(
                &format!("plant.participation_factors[{i}]"),
                format!(
                    "alpha*m = {} but participation factors must invert droop gains",
                    a * m
                ),
            ));
        }
    }
    for (i, &s) in plant.sensitivities.iter().enumerate() {
        if s < 0.0 {
            return Err(invalid(
                &format!("plant.sensitivities[{i}]"),
                "must be nonnegative",
            ));
        }
    }
    if !exceeds(plant.v_ref, 0.0) {
        return Err(invalid("plant.v_ref", "must be positive"));
    }
    if plant.v_open.is_empty() {
        return Err(invalid("plant.v_open", "needs at least one breakpoint"));
    }
    if plant.v_open[0].0 != 0.0 {
        return Err(invalid(
            "plant.v_open[0]",
            "first breakpoint must be at t = 0",
        ));
    }
    for (k, pair) in plant.v_open.windows(2).enumerate() {
        if pair[1].0 <= pair[0].0 {
            return Err(invalid(
                &format!("plant.v_open[{}]", k + 1),
                "breakpoint times must be strictly increasing",
            ));
        }
    }
    for (k, &(t_s, _)) in plant.v_open.iter().enumerate() {
        check_grid(&format!("plant.v_open[{k}]"), t_s, dt)?;
    }

    let graph = &config.graph;
    if graph.reference_flags.len() != n {
        return Err(invalid(
            "graph.reference_flags",
            format!("expected {n} entries, got {}", graph.reference_flags.len()),
        ));
    }
    for (i, &f) in graph.reference_flags.iter().enumerate() {
        if f > 1 {
            return Err(invalid(
                &format!("graph.reference_flags[{i}]"),
                "flags are 0 or 1",
            ));
        }
    }
    let check_pair = |field: &str, i: usize, j: usize| -> Result<(), ScenarioError> {
        if i >= n || j >= n {
            return Err(invalid(
                field,
                format!("agent index out of range ({i}, {j}), N = {n}"),
            ));
        }
        if i == j {
            return Err(invalid(field, "self-loops are not allowed"));
        }
        Ok(())
    };
    let check_delay = |field: &str, delay_s: f64| -> Result<(), ScenarioError> {
        if delay_s < 0.0 {
            return Err(invalid(field, "delay must be nonnegative"));
        }
        if delay_s > 0.0 && delay_s < dt {
            return Err(invalid(
                field,
                format!("nonzero delay {delay_s} must be at least dt = {dt}"),
            ));
        }
        Ok(())
    };
    let mut seen = std::collections::HashSet::new();
    for (k, e) in graph.edges.iter().enumerate() {
        let field = format!("graph.edges[{k}]");
        check_pair(&field, e.i, e.j)?;
        if !exceeds(e.weight, 0.0) {
            return Err(invalid(&field, "edge weight must be positive"));
        }
        check_delay(&field, e.delay_s)?;
        if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
            return Err(invalid(
                &field,
                format!("duplicate edge ({}, {})", e.i, e.j),
            ));
        }
    }
    for (k, ev) in graph.events.iter().enumerate() {
        let field = format!("graph.events[{k}]");
        if ev.t_s < 0.0 {
            return Err(invalid(&field, "event time must be nonnegative"));
        }
        check_grid(&field, ev.t_s, dt)?;
        use crate::graph::TopologyEventKind::*;
        match ev.kind {
            AddEdge {
                i,
                j,
                weight,
                delay_s,
            } => {
                check_pair(&field, i, j)?;
                if !exceeds(weight, 0.0) {
                    return Err(invalid(&field, "edge weight must be positive"));
                }
                check_delay(&field, delay_s)?;
            }
            RemoveEdge { i, j } => check_pair(&field, i, j)?,
            ReweightEdge { i, j, weight } => {
                check_pair(&field, i, j)?;
                if !exceeds(weight, 0.0) {
                    return Err(invalid(&field, "edge weight must be positive"));
                }
            }
            IsolateAgent { agent } => {
                if agent >= n {
                    return Err(invalid(
                        &field,
                        format!("agent {agent} out of range, N = {n}"),
                    ));
                }
            }
        }
    }
    for (k, loss) in graph.loss.iter().enumerate() {
        let field = format!("graph.loss[{k}]");
        check_pair(&field, loss.i, loss.j)?;
        if !exceeds(loss.period_s, 0.0) {
            return Err(invalid(&field, "loss period must be positive"));
        }
        if !(exceeds(loss.duty, 0.0) && loss.duty <= 1.0) {
            return Err(invalid(&field, "duty cycle must be in (0, 1]"));
        }
        if loss.phase_s < 0.0 {
            return Err(invalid(&field, "phase must be nonnegative"));
        }
        check_grid(&format!("{field}.period_s"), loss.period_s, dt)?;
        check_grid(&format!("{field}.phase_s"), loss.phase_s, dt)?;
    }
    for (k, noise) in graph.noise.iter().enumerate() {
        let field = format!("graph.noise[{k}]");
        check_pair(&field, noise.i, noise.j)?;
        if !(noise.amplitude >= 0.0 && noise.amplitude < 1.0) {
            return Err(invalid(&field, "noise amplitude must be in [0, 1)"));
        }
        if noise.seed.is_none() {
            return Err(invalid(
                &field,
                "noise seed unresolved (load via validate_and_resolve)",
            ));
        }
    }

    let protocol = &config.protocol;
    if protocol.m.len() != 2 || protocol.m.iter().any(|row| row.len() != 2) {
        return Err(invalid("protocol.m", "design weight must be 2x2"));
    }
    let m = config.design_weight();
    if linalg::check_symmetric(&m).is_err() {
        return Err(invalid("protocol.m", "design weight must be symmetric"));
    }
    if !matches!(linalg::is_positive_definite(&m), Ok(true)) {
        return Err(invalid(
            "protocol.m",
            "design weight must be positive definite",
        ));
    }
    if protocol.rho0.len() != n {
        return Err(invalid(
            "protocol.rho0",
            format!("expected {n} entries, got {}", protocol.rho0.len()),
        ));
    }
    for (i, &r) in protocol.rho0.iter().enumerate() {
        if r < 0.0 {
            return Err(invalid(
                &format!("protocol.rho0[{i}]"),
                "initial gains are nonnegative",
            ));
        }
    }
    if protocol.initial_x.len() != n {
        return Err(invalid(
            "protocol.initial_x",
            format!("expected {n} entries, got {}", protocol.initial_x.len()),
        ));
    }
    if config.outputs.directory.is_empty() {
        return Err(invalid("outputs.directory", "must not be empty"));
    }
    Ok(())
}

/// Built-in scenario, resolved and validated.
pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = preset_raw(name)?;
    validate_and_resolve(&mut config).expect("built-in presets validate");
    Ok(config)
}

/// Built-in scenario before default resolution, for callers that apply
/// CLI overrides first.
pub fn preset_raw(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    match name {
        "scenario1" => Ok(preset_droop_only()),
        "scenario2" => Ok(preset_lossy_ring(4, 8.0)),
        "scenario3" => Ok(preset_noisy_link_failure()),
        "scenario4" => Ok(preset_isolation_delay()),
        _ => Err(ScenarioError::UnknownPreset {
            name: name.to_string(),
        }),
    }
}

/// One-line description of each preset for `presets list`.
pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "scenario1" => "droop control only; the load step leaves a steady-state voltage error",
        "scenario2" => "4-agent ring, lossy link 1-2 (0.1 s period), controller enabled at 0.55 s",
        "scenario3" => "link 1-2 removed at 0.8 s, +/-10% link noise, agent 3 at 80% droop gain",
        "scenario4" => "20 ms link delays, agent 2 isolated at 0.6 s holding its last command",
        _ => "",
    }
}

/// Shared frame of the four-agent studies: 630 V pilot bus sagging to
/// 620 V at t = 0.5 s, unit-weight ring, lead agent 0, controller
/// enabled at t = 0.55 s. Magnitudes are artifact choices sized so the
/// droop layer leaves a visible fraction-of-a-percent error.
fn base_ring(agent_count: usize, t_end_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: 1,
        plant: PlantConfig {
            agent_count,
            droop_gains: vec![7e-6; agent_count],
            participation_factors: Vec::new(),
            sensitivities: vec![1e-5; agent_count],
            v_ref: 630.0,
            kp: -2.8,
            ki: -0.02,
            v_open: vec![(0.0, 630.0), (0.5, 620.0)],
            droop_only: false,
        },
        graph: GraphSchedule {
            edges: crate::graph::ring_edges(agent_count, 1.0, 0.0),
            reference_flags: {
                let mut flags = vec![0u8; agent_count];
                flags[0] = 1;
                flags
            },
            events: Vec::new(),
            loss: Vec::new(),
            noise: Vec::new(),
        },
        protocol: ProtocolSection::default(),
        solver: SolverSection {
            dt_s: 1e-3,
            t_end_s,
            seed: 1,
            freeze_rho: false,
        },
        activation_t_s: 0.55,
        outputs: OutputSection::default(),
    }
}

fn preset_droop_only() -> ScenarioConfig {
    let mut config = base_ring(4, 1.5);
    config.plant.droop_only = true;
    config
}

fn preset_lossy_ring(agent_count: usize, t_end_s: f64) -> ScenarioConfig {
    let mut config = base_ring(agent_count, t_end_s);
    config.graph.loss = vec![crate::graph::LossProcess {
        i: 1,
        j: 2,
        period_s: 0.1,
        duty: 0.5,
        phase_s: 0.0,
    }];
    config
}

fn preset_noisy_link_failure() -> ScenarioConfig {
    let mut config = base_ring(4, 8.0);
    config.plant.droop_gains[3] = 5.6e-6;
    config.graph.events = vec![crate::graph::TopologyEvent {
        t_s: 0.8,
        kind: crate::graph::TopologyEventKind::RemoveEdge { i: 1, j: 2 },
    }];
    config.graph.noise = config
        .graph
        .edges
        .iter()
        .map(|e| crate::graph::NoiseProcess {
            i: e.i,
            j: e.j,
            amplitude: 0.1,
            seed: None,
        })
        .collect();
    config
}

fn preset_isolation_delay() -> ScenarioConfig {
    let mut config = base_ring(4, 8.0);
    for e in &mut config.graph.edges {
        e.delay_s = 0.02;
    }
    config.graph.events = vec![crate::graph::TopologyEvent {
        t_s: 0.6,
        kind: crate::graph::TopologyEventKind::IsolateAgent { agent: 2 },
    }];
    config
}

/// Scenario-2 frame scaled to an `agent_count`-ring with the identical
/// per-agent parameters and protocol constants; the horizon stretches to
/// 16 s because the disturbance diffuses across a wider ring. Used by
/// the scale-free regression suite.
pub fn ring_regression(agent_count: usize) -> ScenarioConfig {
    let mut config = preset_lossy_ring(agent_count, 16.0);
    validate_and_resolve(&mut config).expect("regression config validates");
    config
}
