//! Graph-based Douglas-Rachford splitting for feasibility problems over
//! linear subspaces of `R^p`.
//!
//! The crate covers the whole path from geometry to experiments:
//!
//! - [`subspace`]: orthonormal-basis subspaces, projections, complements,
//!   intersections and principal angles.
//! - [`graph`]: the `(G, G')` graph pairs, Laplacian factor `Z`, degree
//!   balance and `alpha`.
//! - [`engine`]: the graph iteration, classical two-set DR and the run loop.
//! - [`limits`]: closed-form limits used as stopping targets and test oracles.
//! - [`angles`]: Friedrichs angles, including the product-space form for `n`
//!   sets.
//! - [`harness`]: seeded sweeps over the relaxation parameter and the
//!   angle-versus-iterations comparison.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angles;
mod dense;
pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod limits;
pub mod subspace;

pub use angles::{friedrichs, pierra_angle, pierra_product, AngleReport};
pub use engine::{
    classical_dr_step, demo_spiral, graph_dr_step, run, run_until_stationary, IterationState, RunConfig,
    RunResult, SpiralPoint, SpiralRun, Trace,
};
pub use error::{Error, Result};
pub use graph::{factor_z, solve_alpha, Algorithm, AlgorithmGraph, GraphName, SplittingOperator};
pub use harness::{
    aggregate_by_n, best_theta, compare, generate_problem, theta_sweep, AggregateRecord, BestTheta,
    CompareRecord, DimMode, ExperimentConfig, SweepRecord,
};
pub use limits::{build_e, dr_limit_two, explicit_limits, LimitData, LimitOracle};
pub use subspace::{intersect_many, orthonormalize, principal_angles, random_subspace, Problem, Subspace, RANK_TOL};
