//! The graph-based Douglas-Rachford iteration and its classical two-set
//! special case.
//!
//! Governing blocks `v_1, ..., v_{n-1}` are held as the columns of a
//! `p x (n-1)` matrix and shadow blocks `x_1, ..., x_n` as the columns of a
//! `p x n` matrix. Column-major storage makes the flattened governing matrix
//! the stacked vector `(v_1; ...; v_{n-1})`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::graph::SplittingOperator;
use crate::limits::dr_limit_two;
use crate::subspace::{orthonormalize, Problem, Subspace, RANK_TOL};

/// Parameters of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    theta: f64,
    tol: f64,
    max_iters: usize,
    trace: bool,
}

impl RunConfig {
    pub const DEFAULT_TOL: f64 = 1e-6;
    pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 2.0) {
            return Err(invalid(format!("relaxation parameter {theta} must lie in (0, 2)")));
        }
        Ok(Self { theta, tol: Self::DEFAULT_TOL, max_iters: Self::DEFAULT_MAX_ITERS, trace: false })
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(invalid("stopping tolerance must be positive"));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Result<Self> {
        if max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        self.max_iters = max_iters;
        Ok(self)
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    pub fn trace(&self) -> bool {
        self.trace
    }
}

/// Iterates after `k` full sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub v: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub k: usize,
}

impl IterationState {
    /// Starting state. The shadow blocks are zero and never read before the
    /// first sweep writes them.
    pub fn new(v0: DMatrix<f64>) -> Self {
        let (p, m) = v0.shape();
        Self { x: DMatrix::zeros(p, m + 1), v: v0, k: 0 }
    }
}

/// Per-iteration record kept when tracing is on. Entry `k` holds `v^k` and
/// the shadows produced by the sweep that started from `v^{k-1}` (zeros at
/// `k = 0`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub residuals: Vec<f64>,
    pub governing: Vec<DMatrix<f64>>,
    pub shadows: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub iterations: usize,
    pub converged: bool,
    /// `||v^k - v*||` at exit (or `||v^k - v^{k-1}||` under the fallback rule).
    pub final_residual: f64,
    pub x_final: DVector<f64>,
    pub shadows: DMatrix<f64>,
    pub v_final: DMatrix<f64>,
    pub trace: Option<Trace>,
}

fn check_blocks(problem: &Problem, op: &SplittingOperator, v: &DMatrix<f64>) -> Result<()> {
    check_dim(problem.len(), op.n())?;
    check_dim(problem.ambient_dim(), v.nrows())?;
    check_dim(op.n() - 1, v.ncols())
}

/// Reusable workspace for the sweep; avoids per-iteration allocation.
struct Sweeper<'a> {
    problem: &'a Problem,
    op: &'a SplittingOperator,
    zt: DMatrix<f64>,
    zv: DMatrix<f64>,
    xz: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl<'a> Sweeper<'a> {
    fn new(problem: &'a Problem, op: &'a SplittingOperator) -> Self {
        let (p, n) = (problem.ambient_dim(), op.n());
        Self {
            problem,
            op,
            zt: op.z().transpose(),
            zv: DMatrix::zeros(p, n),
            xz: DMatrix::zeros(p, n - 1),
            y: DMatrix::zeros(p, 1),
        }
    }

    fn sweep(&mut self, theta: f64, v: &mut DMatrix<f64>, x: &mut DMatrix<f64>) {
        v.mul_to(&self.zt, &mut self.zv);
        for i in 0..self.op.n() {
            let d = self.op.degree(i) as f64;
            let mut y = self.y.column_mut(0);
            y.copy_from(&self.zv.column(i));
            y /= d;
            for &h in self.op.in_neighbors(i) {
                y.axpy(2.0 / d, &x.column(h), 1.0);
            }
            self.problem.subspace(i).project_columns_in_place(&mut self.y);
            x.column_mut(i).copy_from(&self.y.column(0));
        }
        x.mul_to(self.op.z(), &mut self.xz);
        *v -= &self.xz * theta;
    }
}

/// One full sweep of the graph-based iteration: shadows in increasing node
/// order (in-edge sums read the already updated predecessors), then the
/// governing update `v_j <- v_j - theta * sum_i Z_ij x_i`.
pub fn graph_dr_step(
    problem: &Problem,
    op: &SplittingOperator,
    theta: f64,
    state: &IterationState,
) -> Result<IterationState> {
    check_blocks(problem, op, &state.v)?;
    check_dim(op.n(), state.x.ncols())?;
    check_dim(problem.ambient_dim(), state.x.nrows())?;
    let mut next = state.clone();
    Sweeper::new(problem, op).sweep(theta, &mut next.v, &mut next.x);
    next.k += 1;
    Ok(next)
}

/// One step of two-set Douglas-Rachford. Returns `(x1, x2, v_next)`.
pub fn classical_dr_step(
    u1: &Subspace,
    u2: &Subspace,
    theta: f64,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    check_dim(u1.ambient_dim(), u2.ambient_dim())?;
    let x1 = u1.project(v)?;
    let x2 = u2.project(&(&x1 * 2.0 - v))?;
    let v_next = v + (&x2 - &x1) * theta;
    Ok((x1, x2, v_next))
}

enum Stop<'a> {
    Limit(&'a DMatrix<f64>),
    Stationary,
}

/// Iterates until `||v^k - v*|| < tol` (stacked Euclidean norm), checked
/// after every full sweep, or until `max_iters` sweeps. Hitting the cap is
/// reported through `converged = false`.
pub fn run(
    problem: &Problem,
    op: &SplittingOperator,
    config: &RunConfig,
    v0: &DMatrix<f64>,
    v_star: &DMatrix<f64>,
) -> Result<RunResult> {
    check_blocks(problem, op, v0)?;
    check_blocks(problem, op, v_star)?;
    drive(problem, op, config, v0, Stop::Limit(v_star))
}

/// Fallback for when no limit is known: stops once `||v^{k+1} - v^k|| < tol`.
pub fn run_until_stationary(
    problem: &Problem,
    op: &SplittingOperator,
    config: &RunConfig,
    v0: &DMatrix<f64>,
) -> Result<RunResult> {
    check_blocks(problem, op, v0)?;
    drive(problem, op, config, v0, Stop::Stationary)
}

fn drive(
    problem: &Problem,
    op: &SplittingOperator,
    config: &RunConfig,
    v0: &DMatrix<f64>,
    stop: Stop<'_>,
) -> Result<RunResult> {
    let mut state = IterationState::new(v0.clone());
    let mut sweeper = Sweeper::new(problem, op);
    let mut previous = v0.clone();
    let mut trace = config.trace.then(Trace::default);

    let residual_of = |v: &DMatrix<f64>, prev: &DMatrix<f64>| match stop {
        Stop::Limit(v_star) => (v - v_star).norm(),
        Stop::Stationary => (v - prev).norm(),
    };
    let mut residual = match stop {
        Stop::Limit(v_star) => (v0 - v_star).norm(),
        Stop::Stationary => f64::INFINITY,
    };
    if let Some(t) = trace.as_mut() {
        t.residuals.push(residual);
        t.governing.push(state.v.clone());
        t.shadows.push(state.x.clone());
    }

    while !(residual < config.tol) && state.k < config.max_iters {
        if matches!(stop, Stop::Stationary) {
            previous.copy_from(&state.v);
        }
        sweeper.sweep(config.theta, &mut state.v, &mut state.x);
        state.k += 1;
        residual = residual_of(&state.v, &previous);
        if let Some(t) = trace.as_mut() {
            t.residuals.push(residual);
            t.governing.push(state.v.clone());
            t.shadows.push(state.x.clone());
        }
    }

    Ok(RunResult {
        iterations: state.k,
        converged: residual < config.tol,
        final_residual: residual,
        x_final: state.x.column(0).into_owned(),
        shadows: state.x,
        v_final: state.v,
        trace,
    })
}

/// Row of the two-line demonstration: governing point, its two shadows and
/// their distances to the limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralPoint {
    pub k: usize,
    pub v: [f64; 2],
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub dist_v: f64,
    pub dist_x: f64,
}

/// Output of [`demo_spiral`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralRun {
    pub result: RunResult,
    pub points: Vec<SpiralPoint>,
}

pub const DEFAULT_SPIRAL_ANGLE: f64 = std::f64::consts::PI / 12.0;
pub const SPIRAL_START: [f64; 2] = [0.5, 1.0];

/// Classical Douglas-Rachford (`theta = 1`) on the x-axis and the line at
/// `angle` through the origin, started from [`SPIRAL_START`].
///
/// Row `k` pairs `v^k` with the shadows it generates (`x1 = P_{U1} v^k`,
/// `x2 = P_{U2}(2 x1 - v^k)`); `dist_x` is the distance of `x1` to `x*`.
pub fn demo_spiral(angle: f64, tol: f64) -> Result<SpiralRun> {
    if !(angle > 0.0 && angle < std::f64::consts::FRAC_PI_2) {
        return Err(invalid("spiral angle must lie in (0, pi/2)"));
    }
    let u1 = orthonormalize(&DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), RANK_TOL)?;
    let u2 = orthonormalize(&DMatrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()]), RANK_TOL)?;
    let problem = Problem::new(vec![u1.clone(), u2.clone()])?;
    let op = SplittingOperator::named(crate::graph::Algorithm::Sequential, 2)?;
    let config = RunConfig::new(1.0)?.with_tol(tol)?.with_trace(true);

    let v0 = DVector::from_column_slice(&SPIRAL_START);
    let v_star = dr_limit_two(&u1, &u2, &v0)?;
    let x_star = problem.intersection().project_unchecked(&v_star);
    // The sequential factor for n = 2 is (1, -1)^T, so v is the classical iterate.
    let result = run(&problem, &op, &config, &DMatrix::from_column_slice(2, 1, v0.as_slice()),
        &DMatrix::from_column_slice(2, 1, v_star.as_slice()))?;

    let trace = result.trace.as_ref().expect("trace requested");
    let points = trace
        .governing
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let v = v.column(0).into_owned();
            let (x1, x2, _) = classical_dr_step(&u1, &u2, 1.0, &v).expect("dimensions fixed");
            SpiralPoint {
                k,
                v: [v[0], v[1]],
                x1: [x1[0], x1[1]],
                x2: [x2[0], x2[1]],
                dist_v: (&v - &v_star).norm(),
                dist_x: (&x1 - &x_star).norm(),
            }
        })
        .collect();
    Ok(SpiralRun { result, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Algorithm;

    fn line(x: f64, y: f64) -> Subspace {
        orthonormalize(&DMatrix::from_column_slice(2, 1, &[x, y]), RANK_TOL).unwrap()
    }

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn theta_must_be_in_open_interval() {
        assert!(RunConfig::new(0.0).is_err());
        assert!(RunConfig::new(2.0).is_err());
        assert!(RunConfig::new(f64::NAN).is_err());
        assert!(RunConfig::new(1.999).is_ok());
        assert!(RunConfig::new(1.0).unwrap().with_tol(0.0).is_err());
        assert!(RunConfig::new(1.0).unwrap().with_max_iters(0).is_err());
    }

    #[test]
    fn two_node_sweep_by_hand() {
        // x1 = P_{U1}(v) = (1,0); x2 = P_{U2}(2x1 - v) = P_diag((1,0)) = (.5,.5);
        // v <- v + (x2 - x1) = (.5,.5).
        let problem = Problem::new(vec![line(1.0, 0.0), line(1.0, 1.0)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let state = IterationState::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
        let next = graph_dr_step(&problem, &op, 1.0, &state).unwrap();
        assert_eq!(next.k, 1);
        assert!((next.x.column(0) - vec2(1.0, 0.0)).norm() < 1e-15);
        assert!((next.x.column(1) - vec2(0.5, 0.5)).norm() < 1e-15);
        assert!((next.v.column(0) - vec2(0.5, 0.5)).norm() < 1e-15);

        let (x1, x2, v) = classical_dr_step(&line(1.0, 0.0), &line(1.0, 1.0), 1.0, &vec2(1.0, 0.0)).unwrap();
        assert_eq!(x1, vec2(1.0, 0.0));
        assert!((x2 - vec2(0.5, 0.5)).norm() < 1e-15);
        assert!((v - vec2(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn classical_step_examples() {
        let u = line(1.0, 2.0);
        let v = u.project(&vec2(3.0, 1.0)).unwrap();
        let (x1, x2, next) = classical_dr_step(&u, &u, 0.7, &v).unwrap();
        assert!((&x1 - &v).norm() < 1e-14 && (&x2 - &v).norm() < 1e-14 && (&next - &v).norm() < 1e-14);

        let (x1, x2, next) = classical_dr_step(&line(1.0, 0.0), &line(0.0, 1.0), 1.0, &vec2(1.0, 0.0)).unwrap();
        assert!((x1 - vec2(1.0, 0.0)).norm() < 1e-15);
        assert!(x2.norm() < 1e-15);
        assert!(next.norm() < 1e-15);

        assert!(classical_dr_step(&line(1.0, 0.0), &Subspace::full(3), 1.0, &vec2(1.0, 0.0)).is_err());
    }

    #[test]
    fn full_space_zero_start_stays_zero() {
        let problem = Problem::new(vec![Subspace::full(3); 3]).unwrap();
        let op = SplittingOperator::named(Algorithm::Complete, 3).unwrap();
        let mut state = IterationState::new(DMatrix::zeros(3, 2));
        for _ in 0..5 {
            state = graph_dr_step(&problem, &op, 1.3, &state).unwrap();
        }
        assert_eq!(state.v, DMatrix::zeros(3, 2));
        assert_eq!(state.x, DMatrix::zeros(3, 3));
    }

    #[test]
    fn step_rejects_mismatched_blocks() {
        let problem = Problem::new(vec![line(1.0, 0.0), line(0.0, 1.0)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 3).unwrap();
        let state = IterationState::new(DMatrix::zeros(2, 2));
        assert!(graph_dr_step(&problem, &op, 1.0, &state).is_err());
    }

    #[test]
    fn run_from_limit_takes_zero_iterations() {
        let problem = Problem::new(vec![line(1.0, 0.0), line(1.0, 1.0)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 0.0]);
        let res = run(&problem, &op, &RunConfig::new(1.0).unwrap(), &v, &v).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
    }

    #[test]
    fn run_reports_cap_without_failing() {
        let problem = Problem::new(vec![line(1.0, 0.0), line(1.0, 0.01)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let cfg = RunConfig::new(1.0).unwrap().with_max_iters(3).unwrap();
        let v0 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let res = run(&problem, &op, &cfg, &v0, &DMatrix::zeros(2, 1)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert!(res.final_residual >= cfg.tol());
    }

    #[test]
    fn stationary_fallback_converges() {
        let problem = Problem::new(vec![line(1.0, 0.0), line(1.0, 1.0)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let v0 = DMatrix::from_column_slice(2, 1, &[0.3, -2.0]);
        let res = run_until_stationary(&problem, &op, &RunConfig::new(1.0).unwrap(), &v0).unwrap();
        assert!(res.converged);
        assert!(res.v_final.norm() < 1e-5);
    }

    #[test]
    fn lines_at_sixty_degrees_contract_by_half() {
        // At theta = 1 the rate is the cosine of the angle, here 1/2.
        let phi = std::f64::consts::FRAC_PI_3;
        let problem = Problem::new(vec![line(1.0, 0.0), line(phi.cos(), phi.sin())]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let v0 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let res = run(&problem, &op, &RunConfig::new(1.0).unwrap(), &v0, &DMatrix::zeros(2, 1)).unwrap();
        let predicted = (1e-6f64 / 1.0).ln() / 0.5f64.ln();
        assert!(res.converged);
        assert_eq!(res.iterations, predicted.ceil() as usize);
    }

    #[test]
    fn spiral_bookkeeping_and_monotonicity() {
        let demo = demo_spiral(DEFAULT_SPIRAL_ANGLE, 1e-6).unwrap();
        assert_eq!(demo.points.len(), demo.result.iterations + 1);
        assert!(demo.points.windows(2).all(|w| w[1].dist_v < w[0].dist_v));
        let rises = demo.points.windows(2).filter(|w| w[1].dist_x > w[0].dist_x).count();
        assert!(rises > 0, "shadow distance should oscillate");
        assert!(demo_spiral(0.0, 1e-6).is_err());
    }
}
