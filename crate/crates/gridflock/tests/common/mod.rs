//! Shared helpers for the integration suites: reference
//! implementations (matrix exponential, Jacobi eigensolver) written
//! independently of the library's linear algebra, plus the frozen-gain
//! scenario whose closed loop is exactly linear.
#![allow(dead_code)]

use gridflock::graph::{Edge, GraphSchedule};
use gridflock::linalg::RealMatrix;
use gridflock::plant::PlantConfig;
use gridflock::scenario::{
    validate_and_resolve, OutputSection, ProtocolSection, ScenarioConfig, SolverSection,
};
use gridflock::trace::SimTrace;
use nalgebra::{DMatrix, DVector};

/// Matrix exponential by Taylor series under scaling and squaring:
/// halve the matrix until its norm is at most 1/2, sum twenty Taylor
/// terms (the remainder is below 1e-26 at that norm), square back up.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert!(m.is_square(), "exponential of a square matrix only");
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let tol = 1e-14 * m.norm().max(1.0);
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eigenvalues
}

/// Fixed gains of the three-agent oracle loop.
pub const ORACLE_RHO: [f64; 3] = [1.0, 0.8, 1.25];

/// Initial agent states of the oracle loop.
pub const ORACLE_X0: [(f64, f64); 3] = [(1.0, 0.5), (-3.0, 0.25), (2.0, -1.0)];

/// Three agents with frozen gains on a constant zero-delay graph, PI
/// gains zeroed and sensitivities zeroed: the reference is identically
/// zero and the cooperative loop is exactly the linear system
/// `x_dot = (I (x) A - (diag(rho) Lbar) (x) BB'P) x`.
pub fn frozen_gain_scenario(dt_s: f64) -> ScenarioConfig {
    let mut config = ScenarioConfig {
        schema_version: 1,
        plant: PlantConfig {
            agent_count: 3,
            droop_gains: vec![1.0; 3],
            participation_factors: Vec::new(),
            sensitivities: vec![0.0; 3],
            v_ref: 630.0,
            kp: 0.0,
            ki: 0.0,
            v_open: vec![(0.0, 630.0)],
            droop_only: false,
        },
        graph: GraphSchedule {
            edges: vec![
                Edge {
                    i: 0,
                    j: 1,
                    weight: 1.0,
                    delay_s: 0.0,
                },
                Edge {
                    i: 1,
                    j: 2,
                    weight: 2.0,
                    delay_s: 0.0,
                },
                Edge {
                    i: 0,
                    j: 2,
                    weight: 0.5,
                    delay_s: 0.0,
                },
            ],
            reference_flags: vec![1, 0, 0],
            events: Vec::new(),
            loss: Vec::new(),
            noise: Vec::new(),
        },
        protocol: ProtocolSection {
            m: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            rho0: ORACLE_RHO.to_vec(),
            initial_x: ORACLE_X0.to_vec(),
        },
        solver: SolverSection {
            dt_s,
            t_end_s: 1.0,
            seed: 0,
            freeze_rho: true,
        },
        activation_t_s: 0.0,
        outputs: OutputSection::default(),
    };
    validate_and_resolve(&mut config).expect("oracle scenario validates");
    config
}

/// Expanded Laplacian of the oracle graph, written out by hand.
pub fn oracle_expanded_laplacian() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[
            2.5, -1.0, -0.5, //
            -1.0, 3.0, -2.0, //
            -0.5, -2.0, 2.5,
        ],
    )
}

/// Stacked closed-loop matrix of the oracle loop for the design
/// matrix `p`, assembled directly from Kronecker products.
pub fn oracle_closed_loop(p: &RealMatrix) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let bbtp = &b * (b.transpose() * p);
    let rho_l =
        DMatrix::from_diagonal(&DVector::from_row_slice(&ORACLE_RHO)) * oracle_expanded_laplacian();
    DMatrix::identity(3, 3).kronecker(&a) - rho_l.kronecker(&bbtp)
}

/// Row `row` of a trace stacked agent-major: `[x1_0, x2_0, x1_1, ...]`.
pub fn stacked_row(trace: &SimTrace, row: usize) -> DVector<f64> {
    let n = trace.agent_count();
    DVector::from_fn(2 * n, |k, _| trace.x[row][k / 2][k % 2])
}

/// Max-norm gap between the engine trajectory of the frozen-gain
/// scenario at `dt_s` and the matrix exponential propagated on the
/// same grid. Also asserts the frozen gains never move.
pub fn engine_vs_expm_error(dt_s: f64) -> f64 {
    let config = frozen_gain_scenario(dt_s);
    let engine = gridflock::engine::Engine::new(&config).unwrap();
    let p = RealMatrix::from_fn(2, 2, |i, j| engine.gain().p[(i, j)]);
    let step = expm(&(oracle_closed_loop(&p) * dt_s));

    let sim = engine.run().unwrap();
    assert!(!sim.diverged);
    let mut reference = DVector::from_fn(6, |k, _| {
        let (x1, x2) = ORACLE_X0[k / 2];
        if k % 2 == 0 {
            x1
        } else {
            x2
        }
    });
    let mut max_err = 0.0f64;
    for row in 0..sim.rows() {
        max_err = max_err.max((stacked_row(&sim, row) - &reference).amax());
        reference = &step * reference;
    }
    let last = sim.rows() - 1;
    assert_eq!(sim.rho[last].as_slice(), ORACLE_RHO);
    max_err
}
