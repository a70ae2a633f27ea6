//! Command-line interface: `run`, `stability`, `care`, and `presets`
//! subcommands over the library, with a stable exit-code contract:
//! 0 success, 2 divergence, 3 config/solve error, 4 stability-check
//! failure.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::engine::{self, EngineError};
use crate::linalg::{
    care::double_integrator, eigenvalues_bounded, solve_care, LinalgError, RealMatrix,
};
use crate::scenario::{self, ScenarioConfig, ScenarioError, PRESET_NAMES};
use crate::stability::{
    default_omega_max, default_threshold, frequency_sweep, frozen_loop_from_run, StabilityError,
};
use crate::trace::{self, RunSummary, SimTrace};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_SWEEP_FAILED: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error("cannot write {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("no finished run in {dir}: missing {missing}")]
    MissingRun { dir: String, missing: String },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// Exit code this error maps to. Everything is a config/solve
    /// error (3) except a failed undelayed-stability precondition,
    /// which is a stability verdict (4).
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Stability(StabilityError::UndelayedUnstable { .. }) => EXIT_SWEEP_FAILED,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gridflock",
    version,
    about = "Adaptive cooperative voltage-control simulator"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write trace CSVs plus a summary
    Run(RunArgs),
    /// Delay-margin frequency sweep of a finished run
    Stability(StabilityArgs),
    /// Solve the design Riccati equation and print the gain data
    Care(CareArgs),
    /// Inspect the built-in scenarios
    Presets(PresetsArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in scenario name (see `presets list`)
    #[arg(
        long,
        value_name = "NAME",
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    preset: Option<String>,

    /// Scenario JSON file
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,

    /// Output directory (overrides GRIDFLOCK_OUT and the config)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the solver seed (also reseeds defaulted link noise)
    #[arg(long)]
    seed: Option<u64>,

    /// Override the integration step in seconds
    #[arg(long, value_name = "SECONDS")]
    dt: Option<f64>,

    /// Override the end time in seconds
    #[arg(long, value_name = "SECONDS")]
    t_end: Option<f64>,

    /// Also write plotting slices fig5_voltage.csv and fig6_reactive.csv
    #[arg(long)]
    plot_data: bool,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    /// Directory holding a finished run (config_echo.json, summary.json)
    #[arg(value_name = "RUN_DIR")]
    run_dir: PathBuf,

    /// Factor applied to every link delay before the sweep
    #[arg(long, default_value_t = 1.0)]
    delay_multiplier: f64,

    /// Sweep ceiling in rad/s (default: scaled to the frozen loop)
    #[arg(long, value_name = "RAD_PER_S")]
    omega_max: Option<f64>,

    /// Number of sweep grid points
    #[arg(long, default_value_t = 4096)]
    grid: usize,
}

#[derive(Debug, Args)]
struct CareArgs {
    /// Drift matrix A as JSON rows, e.g. [[0,1],[0,0]] (default: double integrator)
    #[arg(long, value_name = "JSON")]
    a: Option<String>,

    /// Input matrix B as JSON rows (default: [[0],[1]])
    #[arg(long, value_name = "JSON")]
    b: Option<String>,

    /// Design weight M as JSON rows (default: identity)
    #[arg(long, value_name = "JSON")]
    m: Option<String>,
}

#[derive(Debug, Args)]
struct PresetsArgs {
    #[command(subcommand)]
    action: PresetsAction,
}

#[derive(Debug, Subcommand)]
enum PresetsAction {
    /// List the built-in scenarios
    List,
}

/// Parses the process arguments, dispatches, and maps every outcome to
/// the exit-code contract. Help and version requests exit 0; argument
/// errors exit 3.
pub fn entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Stability(args) => cmd_stability(&args),
        Command::Care(args) => cmd_care(&args),
        Command::Presets(args) => cmd_presets(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Output directory precedence: `--out`, then `GRIDFLOCK_OUT`, then the
/// scenario's own `outputs.directory`.
fn resolve_out_dir(flag: Option<&Path>, env_dir: Option<PathBuf>, config_dir: &str) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = env_dir {
        return dir;
    }
    PathBuf::from(config_dir)
}

fn run_label(args: &RunArgs) -> String {
    if let Some(name) = &args.preset {
        return name.clone();
    }
    let path = args.scenario.as_ref().expect("clap requires one source");
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<u8, CliError> {
    let mut config = match &args.preset {
        Some(name) => scenario::preset_raw(name)?,
        None => scenario::parse_scenario_file(args.scenario.as_ref().unwrap())?,
    };
    // Overrides land on the raw config so default resolution (noise
    // seeds from the solver seed) sees them.
    if let Some(seed) = args.seed {
        config.solver.seed = seed;
    }
    if let Some(dt) = args.dt {
        config.solver.dt_s = dt;
    }
    if let Some(t_end) = args.t_end {
        config.solver.t_end_s = t_end;
    }
    let out_dir = resolve_out_dir(
        args.out.as_deref(),
        env::var_os("GRIDFLOCK_OUT").map(PathBuf::from),
        &config.outputs.directory,
    );
    config.outputs.directory = out_dir.display().to_string();
    scenario::validate_and_resolve(&mut config)?;

    let trace = engine::run(&config)?;
    fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
    let label = run_label(args);
    let written = write_run_outputs(&config, &trace, &out_dir, &label, args.plot_data)?;
    report_run(&config, &trace, &out_dir, &label, &written);
    Ok(if trace.diverged {
        EXIT_DIVERGED
    } else {
        EXIT_OK
    })
}

/// Writes the echo, summary, and trace files; returns the file names
/// written, in order.
fn write_run_outputs(
    config: &ScenarioConfig,
    sim: &SimTrace,
    out_dir: &Path,
    label: &str,
    plot_data: bool,
) -> Result<Vec<&'static str>, CliError> {
    let mut written = vec!["config_echo.json"];
    write_json(config, &out_dir.join("config_echo.json"))?;
    if config.outputs.emit_summary {
        let summary = trace::summarize(sim, config, label);
        write_json(&summary, &out_dir.join("summary.json"))?;
        written.push("summary.json");
    }
    if config.outputs.emit_trace {
        let agents = out_dir.join("trace_agents.csv");
        trace::write_agent_csv(sim, &agents).map_err(|e| io_error(&agents, e))?;
        let bus = out_dir.join("trace_bus.csv");
        trace::write_bus_csv(sim, &bus).map_err(|e| io_error(&bus, e))?;
        written.push("trace_agents.csv");
        written.push("trace_bus.csv");
    }
    if plot_data {
        let voltage = out_dir.join("fig5_voltage.csv");
        trace::write_voltage_csv(sim, &voltage).map_err(|e| io_error(&voltage, e))?;
        let reactive = out_dir.join("fig6_reactive.csv");
        trace::write_reactive_csv(sim, &reactive).map_err(|e| io_error(&reactive, e))?;
        written.push("fig5_voltage.csv");
        written.push("fig6_reactive.csv");
    }
    Ok(written)
}

fn report_run(
    config: &ScenarioConfig,
    sim: &SimTrace,
    out_dir: &Path,
    label: &str,
    written: &[&str],
) {
    let last = sim.rows() - 1;
    println!(
        "{label}: {} agents, {} rows over {} s (dt {} s)",
        config.agent_count(),
        sim.rows(),
        sim.t[last],
        sim.dt_s,
    );
    for line in &sim.events {
        println!("  {line}");
    }
    let v_ref = config.plant.v_ref;
    let dev = (sim.v_pilot[last] - v_ref).abs();
    println!(
        "final |V_pilot - V_ref| = {:.4} V ({:.4}% of {} V)",
        dev,
        100.0 * dev / v_ref,
        v_ref,
    );
    match trace::settle_time(sim, v_ref, config.activation_t_s) {
        Some(t) => println!("settled within 0.5% of V_ref from t = {t:.3} s"),
        None => println!("never settled within 0.5% of V_ref"),
    }
    if sim.diverged {
        eprintln!("state diverged; outputs truncated at t = {} s", sim.t[last]);
    }
    println!("outputs: {} ({})", out_dir.display(), written.join(", "));
}

fn cmd_stability(args: &StabilityArgs) -> Result<u8, CliError> {
    if !(args.delay_multiplier.is_finite() && args.delay_multiplier >= 0.0) {
        return Err(CliError::Invalid(
            "--delay-multiplier must be finite and nonnegative".to_string(),
        ));
    }
    if let Some(omega_max) = args.omega_max {
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(CliError::Invalid(
                "--omega-max must be finite and positive".to_string(),
            ));
        }
    }
    let dir = &args.run_dir;
    let config_path = dir.join("config_echo.json");
    let summary_path = dir.join("summary.json");
    for (path, name) in [
        (&config_path, "config_echo.json"),
        (&summary_path, "summary.json"),
    ] {
        if !path.is_file() {
            return Err(CliError::MissingRun {
                dir: dir.display().to_string(),
                missing: name.to_string(),
            });
        }
    }
    let config = scenario::load_scenario(&config_path)?;
    let summary_text = fs::read_to_string(&summary_path).map_err(|e| io_error(&summary_path, e))?;
    let summary: RunSummary = serde_json::from_str(&summary_text)
        .map_err(|e| CliError::Invalid(format!("{} is malformed: {e}", summary_path.display())))?;
    if summary.diverged {
        return Err(CliError::Invalid(
            "the run diverged; its final gains are not a settled operating point".to_string(),
        ));
    }
    if summary.rho_final.len() != config.agent_count() {
        return Err(CliError::Invalid(format!(
            "summary lists {} gains but the scenario has {} agents",
            summary.rho_final.len(),
            config.agent_count(),
        )));
    }

    let (a, b) = double_integrator();
    let care = solve_care(&a, &b, &config.design_weight())?;
    let frozen = frozen_loop_from_run(&config, &summary.rho_final, args.delay_multiplier, &care.p)?;
    let omega_max = args.omega_max.unwrap_or_else(|| default_omega_max(&frozen));
    let threshold = default_threshold(&frozen);
    let report = frequency_sweep(&frozen, omega_max, args.grid, threshold)?;

    let report_path = dir.join("stability.json");
    write_json(&report, &report_path)?;
    println!(
        "frozen loop: {} agents, delays x{}",
        frozen.agent_count(),
        args.delay_multiplier,
    );
    println!(
        "sweep: {} points over [0, {:.3}] rad/s, threshold {:.3e}",
        report.grid_points, report.omega_max, report.threshold,
    );
    println!(
        "min sigma = {:.6e} at omega = {:.3} rad/s",
        report.min_sigma, report.argmin_omega,
    );
    println!("wrote {}", report_path.display());
    if report.pass {
        println!("PASS: no near-singular frequency found");
        Ok(EXIT_OK)
    } else {
        println!("FAIL: resolvent nearly singular within the sweep range");
        Ok(EXIT_SWEEP_FAILED)
    }
}

/// Parses a matrix argument: JSON rows, or a bare scalar as 1x1.
pub fn parse_matrix_arg(name: &str, text: &str) -> Result<RealMatrix, CliError> {
    let rows: Vec<Vec<f64>> = match serde_json::from_str(text) {
        Ok(rows) => rows,
        Err(_) => match serde_json::from_str::<f64>(text) {
            Ok(v) => vec![vec![v]],
            Err(e) => {
                return Err(CliError::Invalid(format!(
                    "--{name} is not a JSON matrix: {e}"
                )))
            }
        },
    };
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Invalid(format!(
            "--{name} needs at least one row and column"
        )));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Invalid(format!("--{name} rows differ in length")));
    }
    Ok(RealMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain numeric data serializes")
}

fn cmd_care(args: &CareArgs) -> Result<u8, CliError> {
    let (default_a, default_b) = double_integrator();
    let a = match &args.a {
        Some(text) => parse_matrix_arg("a", text)?,
        None => default_a,
    };
    let b = match &args.b {
        Some(text) => parse_matrix_arg("b", text)?,
        None => default_b,
    };
    let m = match &args.m {
        Some(text) => parse_matrix_arg("m", text)?,
        None => RealMatrix::identity(a.nrows(), a.nrows()),
    };
    if !a.is_square() {
        return Err(CliError::Invalid(format!(
            "--a must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(CliError::Invalid(format!(
            "--b must have {} rows to match A, got {}",
            a.nrows(),
            b.nrows(),
        )));
    }
    if m.nrows() != a.nrows() || !m.is_square() {
        return Err(CliError::Invalid(format!(
            "--m must be {0}x{0} to match A, got {1}x{2}",
            a.nrows(),
            m.nrows(),
            m.ncols(),
        )));
    }

    let solution = solve_care(&a, &b, &m)?;
    let closed_loop = &a - &b * &solution.feedback_row;
    let mut eigenvalues: Vec<[f64; 2]> = eigenvalues_bounded(&closed_loop)
        .ok_or(CliError::Linalg(LinalgError::EigenIterationFailed))?
        .iter()
        .map(|ev| [ev.re, ev.im])
        .collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));

    println!("P = {}", json_line(&matrix_rows(&solution.p)));
    println!("B'P = {}", json_line(&matrix_rows(&solution.feedback_row)));
    println!("residual = {}", json_line(&solution.residual_norm));
    println!("closed-loop eigenvalues = {}", json_line(&eigenvalues));
    Ok(EXIT_OK)
}

fn cmd_presets(args: &PresetsArgs) -> Result<u8, CliError> {
    match args.action {
        PresetsAction::List => {
            for name in PRESET_NAMES {
                println!("{name}  {}", scenario::preset_summary(name));
            }
        }
    }
    Ok(EXIT_OK)
}
