//! Simulation traces, summary metrics, and CSV/JSON emission.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::plant::regulation_errors;
use crate::scenario::ScenarioConfig;

/// Complete record of one run on a uniform time grid. All series have
/// one entry per grid point; per-agent series are indexed
/// `[row][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt_s: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<Vector2<f64>>>,
    pub rho: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// Physical reactive-power injections `dQ_i = alpha_i * x1_i`.
    pub d_q: Vec<Vec<f64>>,
    pub v_pilot: Vec<f64>,
    pub dq_ref: Vec<f64>,
    /// Lyapunov monitor samples; absent where any agent's gain is zero.
    pub v_lyap: Vec<Option<f64>>,
    /// Human-readable log of applied events and guard trips.
    pub events: Vec<String>,
    /// True when the divergence guard ended the run early; the grid is
    /// then truncated at the last finite sample.
    pub diverged: bool,
}

impl SimTrace {
    pub fn rows(&self) -> usize {
        self.t.len()
    }

    pub fn agent_count(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Index of the first grid point at or after `t_s`.
    pub fn row_at(&self, t_s: f64) -> usize {
        self.t.partition_point(|&t| t < t_s - 1e-9)
    }
}

/// Headline metrics of a run, serialized as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    /// Per-agent `x1 - dQ_ref` at the final grid point.
    pub final_errors: Vec<f64>,
    /// Earliest time from which |V_pilot - V_ref| stays within 0.5% of
    /// V_ref through the end of the run; null if it never settles.
    pub settle_time_s: Option<f64>,
    pub max_voltage_dev_after_activation: f64,
    pub rho_final: Vec<f64>,
    pub diverged: bool,
}

/// Fraction of `V_ref` within which the pilot voltage counts as
/// settled.
pub const SETTLE_BAND: f64 = 0.005;

/// Computes the summary metrics of a finished trace.
pub fn summarize(trace: &SimTrace, scenario: &ScenarioConfig, label: &str) -> RunSummary {
    let last = trace
        .rows()
        .checked_sub(1)
        .expect("trace has at least one row");
    let v_ref = scenario.plant.v_ref;
    let activation_row = trace.row_at(scenario.activation_t_s);

    let max_dev = trace.v_pilot[activation_row..]
        .iter()
        .map(|v| (v - v_ref).abs())
        .fold(0.0, f64::max);

    RunSummary {
        scenario: label.to_string(),
        final_errors: regulation_errors(&trace.x[last], trace.dq_ref[last]),
        settle_time_s: settle_time(trace, v_ref, scenario.activation_t_s),
        max_voltage_dev_after_activation: max_dev,
        rho_final: trace.rho[last].clone(),
        diverged: trace.diverged,
    }
}

/// Earliest grid time at or after `activation_t_s` from which the
/// pilot-bus deviation stays within the settle band through the end.
pub fn settle_time(trace: &SimTrace, v_ref: f64, activation_t_s: f64) -> Option<f64> {
    if trace.diverged {
        return None;
    }
    let band = SETTLE_BAND * v_ref;
    // first index after the last violation
    let mut start = 0;
    for (k, v) in trace.v_pilot.iter().enumerate() {
        if (v - v_ref).abs() > band {
            start = k + 1;
        }
    }
    if start >= trace.rows() {
        return None;
    }
    let start = start.max(trace.row_at(activation_t_s));
    Some(trace.t[start])
}

fn open(path: &Path) -> std::io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Long-format per-agent series: `t,agent,x1,x2,rho,u,dQ`.
pub fn write_agent_csv(trace: &SimTrace, path: &Path) -> std::io::Result<()> {
    let mut out = open(path)?;
    writeln!(out, "t,agent,x1,x2,rho,u,dQ")?;
    for row in 0..trace.rows() {
        for agent in 0..trace.agent_count() {
            let x = trace.x[row][agent];
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                trace.t[row],
                agent,
                x[0],
                x[1],
                trace.rho[row][agent],
                trace.u[row][agent],
                trace.d_q[row][agent],
            )?;
        }
    }
    out.flush()
}

/// Bus-level series: `t,V_pilot,dQ_ref,V_lyap`, with absent Lyapunov
/// samples written as NaN.
pub fn write_bus_csv(trace: &SimTrace, path: &Path) -> std::io::Result<()> {
    let mut out = open(path)?;
    writeln!(out, "t,V_pilot,dQ_ref,V_lyap")?;
    for row in 0..trace.rows() {
        let v_lyap = trace.v_lyap.get(row).copied().flatten();
        writeln!(
            out,
            "{},{},{},{}",
            trace.t[row],
            trace.v_pilot[row],
            trace.dq_ref[row],
            v_lyap.map_or_else(|| "NaN".to_string(), |v| v.to_string()),
        )?;
    }
    out.flush()
}

/// Pilot-voltage slice for external plotting: `t,V_pilot`.
pub fn write_voltage_csv(trace: &SimTrace, path: &Path) -> std::io::Result<()> {
    let mut out = open(path)?;
    writeln!(out, "t,V_pilot")?;
    for row in 0..trace.rows() {
        writeln!(out, "{},{}", trace.t[row], trace.v_pilot[row])?;
    }
    out.flush()
}

/// Wide-format reactive-power slice: `t,dQ_0,...,dQ_{N-1}`.
pub fn write_reactive_csv(trace: &SimTrace, path: &Path) -> std::io::Result<()> {
    let mut out = open(path)?;
    let headers: Vec<String> = (0..trace.agent_count())
        .map(|i| format!("dQ_{i}"))
        .collect();
    writeln!(out, "t,{}", headers.join(","))?;
    for row in 0..trace.rows() {
        let cells: Vec<String> = trace.d_q[row].iter().map(f64::to_string).collect();
        writeln!(out, "{},{}", trace.t[row], cells.join(","))?;
    }
    out.flush()
}
