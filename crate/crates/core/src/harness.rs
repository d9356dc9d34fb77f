//! Randomized experiments: relaxation-parameter sweeps with performance
//! ratios, best-parameter extraction, and the angle-versus-iterations
//! comparison.
//!
//! Everything is a pure function of [`ExperimentConfig`]. Randomness flows
//! from `master_seed` through per-(n, instance) seeds, so adding algorithms
//! or grid points never changes an existing instance.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::pierra_angle;
use crate::engine::{run, RunConfig};
use crate::error::{invalid, Result};
use crate::graph::{Algorithm, SplittingOperator};
use crate::limits::LimitOracle;
use crate::subspace::{gaussian_matrix, orthonormalize, random_subspace, Problem, Subspace, RANK_TOL};

/// How subspace dimensions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimMode {
    /// Independent subspaces with `dim` uniform in `[d_min, d_max]`.
    Generic { d_min: usize, d_max: usize },
    /// Every subspace contains one shared random `core_dim`-dimensional core.
    CommonCore { core_dim: usize, d_min: usize, d_max: usize },
}

impl DimMode {
    /// Uniform dimensions in `[ceil(p/4), ceil(3p/4)]`.
    pub fn default_for(p: usize) -> Self {
        DimMode::Generic { d_min: p.div_ceil(4), d_max: (3 * p).div_ceil(4) }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let (lo, hi, core) = match *self {
            DimMode::Generic { d_min, d_max } => (d_min, d_max, 0),
            DimMode::CommonCore { core_dim, d_min, d_max } => (d_min, d_max, core_dim),
        };
        if lo == 0 || lo > hi || hi >= p {
            return Err(invalid(format!("subspace dimensions [{lo}, {hi}] must satisfy 1 <= d_min <= d_max < p = {p}")));
        }
        if core >= lo && matches!(self, DimMode::CommonCore { .. }) {
            return Err(invalid(format!("core dimension {core} must be below d_min = {lo}")));
        }
        Ok(())
    }
}

/// Draws one feasibility problem of `n` subspaces of `R^p`.
pub fn generate_problem<R: Rng + ?Sized>(p: usize, n: usize, mode: DimMode, rng: &mut R) -> Result<Problem> {
    mode.validate(p)?;
    if n < 2 {
        return Err(invalid("a problem needs at least two subspaces"));
    }
    let sets = match mode {
        DimMode::Generic { d_min, d_max } => (0..n)
            .map(|_| {
                let d = rng.random_range(d_min..=d_max);
                random_subspace(p, d, rng)
            })
            .collect::<Result<Vec<_>>>()?,
        DimMode::CommonCore { core_dim, d_min, d_max } => {
            let core = gaussian_matrix(p, core_dim, rng);
            (0..n)
                .map(|_| {
                    let d = rng.random_range(d_min..=d_max);
                    let mut m = DMatrix::zeros(p, d);
                    m.columns_mut(0, core_dim).copy_from(&core);
                    m.columns_mut(core_dim, d - core_dim).copy_from(&gaussian_matrix(p, d - core_dim, rng));
                    orthonormalize(&m, RANK_TOL)
                })
                .collect::<Result<Vec<Subspace>>>()?
        }
    };
    Problem::new(sets)
}

/// i.i.d. standard Gaussian governing blocks, `p x (n-1)`.
pub fn random_start<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    gaussian_matrix(p, n - 1, rng)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `parent` for a path of tags.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(parent), |s, &t| splitmix64(s ^ splitmix64(t)))
}

/// Which experiment an instance belongs to; the two draw independent problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sweep = 1,
    Compare = 2,
}

/// A generated instance together with its shared starting points.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub instance_id: usize,
    pub problem: Problem,
    pub starts: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub n_values: Vec<usize>,
    pub instances_per_n: usize,
    pub starts_per_instance: usize,
    pub theta_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub tol: f64,
    pub max_iters: usize,
    pub master_seed: u64,
    pub dim_mode: DimMode,
}

/// `{0.1, 0.2, ..., 1.9}`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentConfig {
    /// Sweep-sized defaults at ambient dimension 50: `n = 3..=12`, 20
    /// instances, 10 starts, the full grid, all six algorithms.
    pub fn sweep_defaults(master_seed: u64) -> Self {
        Self {
            p: 50,
            n_values: (3..=12).collect(),
            instances_per_n: 20,
            starts_per_instance: 10,
            theta_grid: default_theta_grid(),
            algorithms: Algorithm::ALL.to_vec(),
            tol: RunConfig::DEFAULT_TOL,
            max_iters: RunConfig::DEFAULT_MAX_ITERS,
            master_seed,
            dim_mode: DimMode::default_for(50),
        }
    }

    /// As [`sweep_defaults`](Self::sweep_defaults) with 100 instances per `n`.
    pub fn compare_defaults(master_seed: u64) -> Self {
        Self { instances_per_n: 100, ..Self::sweep_defaults(master_seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(invalid("ambient dimension must be at least 2"));
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 3) {
            return Err(invalid("experiment node counts must all be at least 3"));
        }
        if self.instances_per_n == 0 || self.starts_per_instance == 0 {
            return Err(invalid("instances and starts must be positive"));
        }
        if self.theta_grid.is_empty() || self.theta_grid.iter().any(|&t| !(t > 0.0 && t < 2.0)) {
            return Err(invalid("theta grid values must lie in (0, 2)"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("no algorithms selected"));
        }
        RunConfig::new(1.0)?.with_tol(self.tol)?.with_max_iters(self.max_iters)?;
        self.dim_mode.validate(self.p)
    }

    fn run_config(&self, theta: f64) -> Result<RunConfig> {
        RunConfig::new(theta)?.with_tol(self.tol)?.with_max_iters(self.max_iters)
    }

    /// The instance `(n, instance_id)` of `stage`, regenerated from seeds.
    pub fn instance(&self, stage: Stage, n: usize, instance_id: usize) -> Result<Instance> {
        let seed = derive_seed(self.master_seed, &[stage as u64, n as u64, instance_id as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let problem = generate_problem(self.p, n, self.dim_mode, &mut rng)?;
        let starts = (0..self.starts_per_instance)
            .map(|s| random_start(self.p, n, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, s as u64]))))
            .collect();
        Ok(Instance { n, instance_id, problem, starts })
    }

    fn instances(&self, stage: Stage) -> Result<Vec<Instance>> {
        let keys: Vec<(usize, usize)> = self
            .n_values
            .iter()
            .flat_map(|&n| (0..self.instances_per_n).map(move |i| (n, i)))
            .collect();
        keys.into_par_iter().map(|(n, i)| self.instance(stage, n, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub instance_id: usize,
    pub theta: f64,
    pub mean_iterations: f64,
    pub tau: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub instance_id: usize,
    pub pierra_angle_rad: f64,
    pub theta_used: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTheta {
    pub algorithm: Algorithm,
    pub n: usize,
    pub best_theta: f64,
    pub median_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub mean_iterations: f64,
}

/// Mean iteration count and converged fraction over the shared starts.
struct StartsOutcome {
    mean_iterations: f64,
    converged_fraction: f64,
}

fn run_starts(
    problem: &Problem,
    op: &SplittingOperator,
    oracle: &LimitOracle,
    config: &RunConfig,
    starts: &[DMatrix<f64>],
) -> Result<StartsOutcome> {
    let mut total = 0usize;
    let mut converged = 0usize;
    for v0 in starts {
        let limits = oracle.limits(v0)?;
        let res = run(problem, op, config, v0, &limits.v_star)?;
        total += res.iterations;
        converged += usize::from(res.converged);
    }
    let count = starts.len() as f64;
    Ok(StartsOutcome { mean_iterations: total as f64 / count, converged_fraction: converged as f64 / count })
}

/// Runs every algorithm at every grid value from the same starts of every
/// instance and attaches the ratio to the instance's best grid value.
///
/// Grid values with any non-converged start do not take part in the minimum.
pub fn theta_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let instances = config.instances(Stage::Sweep)?;
    let cells: Vec<(&Instance, Algorithm)> = instances
        .iter()
        .flat_map(|inst| config.algorithms.iter().map(move |&a| (inst, a)))
        .collect();

    let per_cell: Vec<Vec<SweepRecord>> = cells
        .into_par_iter()
        .map(|(inst, alg)| {
            let op = SplittingOperator::named(alg, inst.n)?;
            let oracle = LimitOracle::new(&inst.problem, &op)?;
            let mut rows = config
                .theta_grid
                .iter()
                .map(|&theta| {
                    let out = run_starts(&inst.problem, &op, &oracle, &config.run_config(theta)?, &inst.starts)?;
                    Ok(SweepRecord {
                        algorithm: alg,
                        n: inst.n,
                        instance_id: inst.instance_id,
                        theta,
                        mean_iterations: out.mean_iterations,
                        tau: f64::NAN,
                        converged_fraction: out.converged_fraction,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            assign_tau(&mut rows);
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<SweepRecord> = per_cell.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.algorithm, a.n, a.instance_id)
            .cmp(&(b.algorithm, b.n, b.instance_id))
            .then(a.theta.total_cmp(&b.theta))
    });
    Ok(records)
}

fn assign_tau(rows: &mut [SweepRecord]) {
    let best_of = |only_converged: bool| {
        rows.iter()
            .filter(|r| !only_converged || r.converged_fraction == 1.0)
            .map(|r| r.mean_iterations)
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = best_of(true);
    if !best.is_finite() {
        best = best_of(false);
    }
    for r in rows.iter_mut() {
        r.tau = if best > 0.0 { r.mean_iterations / best } else { 1.0 };
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// For every `(algorithm, n)`, the grid value whose median (over instances)
/// mean iteration count is smallest. Ties go to the value closest to 1.
pub fn best_theta(records: &[SweepRecord]) -> Result<Vec<BestTheta>> {
    if records.is_empty() {
        return Err(invalid("no sweep records"));
    }
    // theta bits -> (theta, per-instance mean iterations)
    type ByTheta = BTreeMap<u64, (f64, Vec<f64>)>;
    let mut groups: BTreeMap<(Algorithm, usize), ByTheta> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.algorithm, r.n))
            .or_default()
            .entry(r.theta.to_bits())
            .or_insert_with(|| (r.theta, Vec::new()))
            .1
            .push(r.mean_iterations);
    }
    Ok(groups
        .into_iter()
        .map(|((algorithm, n), by_theta)| {
            let (best_theta, median_iterations) = by_theta
                .into_values()
                .map(|(theta, mut its)| (theta, median(&mut its)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then((a.0 - 1.0).abs().total_cmp(&(b.0 - 1.0).abs())))
                .expect("group is nonempty");
            BestTheta { algorithm, n, best_theta, median_iterations }
        })
        .collect())
}

/// Relaxation parameter to use for each `(algorithm, n)` in [`compare`].
pub type ThetaTable = BTreeMap<(Algorithm, usize), f64>;

pub fn theta_table(best: &[BestTheta]) -> ThetaTable {
    best.iter().map(|b| ((b.algorithm, b.n), b.best_theta)).collect()
}

/// For each instance: the product-space angle once, then every algorithm
/// from the shared starts at its tabulated relaxation parameter.
pub fn compare(config: &ExperimentConfig, thetas: &ThetaTable) -> Result<Vec<CompareRecord>> {
    config.validate()?;
    for &n in &config.n_values {
        for &alg in &config.algorithms {
            let theta = thetas
                .get(&(alg, n))
                .ok_or_else(|| invalid(format!("no relaxation parameter for {alg} at n = {n}")))?;
            RunConfig::new(*theta)?;
        }
    }
    let instances = config.instances(Stage::Compare)?;
    let per_instance: Vec<Vec<CompareRecord>> = instances
        .par_iter()
        .map(|inst| {
            let angle = pierra_angle(&inst.problem)?.angle_rad;
            config
                .algorithms
                .par_iter()
                .map(|&alg| {
                    let theta = thetas[&(alg, inst.n)];
                    let op = SplittingOperator::named(alg, inst.n)?;
                    let oracle = LimitOracle::new(&inst.problem, &op)?;
                    let out = run_starts(&inst.problem, &op, &oracle, &config.run_config(theta)?, &inst.starts)?;
                    Ok(CompareRecord {
                        algorithm: alg,
                        n: inst.n,
                        instance_id: inst.instance_id,
                        pierra_angle_rad: angle,
                        theta_used: theta,
                        mean_iterations: out.mean_iterations,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<CompareRecord> = per_instance.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.algorithm, r.n, r.instance_id));
    Ok(records)
}

/// Mean over instances of the per-instance mean iteration count.
pub fn aggregate_by_n(records: &[CompareRecord]) -> Vec<AggregateRecord> {
    let mut groups: BTreeMap<(Algorithm, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = groups.entry((r.algorithm, r.n)).or_insert((0.0, 0));
        e.0 += r.mean_iterations;
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|((algorithm, n), (sum, count))| AggregateRecord { algorithm, n, mean_iterations: sum / count as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            p: 10,
            n_values: vec![3],
            instances_per_n: 2,
            starts_per_instance: 2,
            theta_grid: vec![0.5, 1.0, 1.5],
            algorithms: vec![Algorithm::Complete, Algorithm::GeneralizedRyu],
            tol: 1e-6,
            max_iters: 100_000,
            master_seed: seed,
            dim_mode: DimMode::default_for(10),
        }
    }

    #[test]
    fn default_dimensions() {
        assert_eq!(DimMode::default_for(50), DimMode::Generic { d_min: 13, d_max: 38 });
        assert_eq!(DimMode::default_for(20), DimMode::Generic { d_min: 5, d_max: 15 });
        assert_eq!(default_theta_grid().len(), 19);
        assert_eq!(default_theta_grid()[18], 1.9);
    }

    #[test]
    fn common_core_guarantees_intersection() {
        let mode = DimMode::CommonCore { core_dim: 2, d_min: 4, d_max: 8 };
        for seed in 0..5 {
            let problem = generate_problem(12, 4, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(problem.intersection().dim() >= 2);
        }
    }

    #[test]
    fn generic_half_dimensional_sets_meet_trivially() {
        let mode = DimMode::Generic { d_min: 25, d_max: 25 };
        for seed in 0..3 {
            let problem = generate_problem(50, 3, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(problem.intersection().is_trivial());
        }
    }

    #[test]
    fn generation_is_deterministic_and_validated() {
        let mode = DimMode::default_for(10);
        let a = generate_problem(10, 3, mode, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = generate_problem(10, 3, mode, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let rng = &mut ChaCha8Rng::seed_from_u64(0);
        assert!(generate_problem(10, 3, DimMode::Generic { d_min: 3, d_max: 10 }, rng).is_err());
        assert!(generate_problem(10, 3, DimMode::CommonCore { core_dim: 3, d_min: 3, d_max: 5 }, rng).is_err());
    }

    #[test]
    fn seeds_are_path_dependent() {
        assert_ne!(derive_seed(1, &[1, 3, 0]), derive_seed(1, &[1, 0, 3]));
        assert_eq!(derive_seed(7, &[2, 4]), derive_seed(7, &[2, 4]));
    }

    #[test]
    fn sweep_ratio_definition() {
        let records = theta_sweep(&small(3)).unwrap();
        assert_eq!(records.len(), 2 * 2 * 3);
        for chunk in records.chunks(3) {
            assert!(chunk.iter().all(|r| r.tau >= 1.0));
            assert_eq!(chunk.iter().map(|r| r.tau).fold(f64::INFINITY, f64::min), 1.0);
        }
        assert_eq!(records, theta_sweep(&small(3)).unwrap());
    }

    #[test]
    fn tau_skips_unconverged_rows() {
        let row = |theta, its, frac| SweepRecord {
            algorithm: Algorithm::Complete,
            n: 3,
            instance_id: 0,
            theta,
            mean_iterations: its,
            tau: f64::NAN,
            converged_fraction: frac,
        };
        let mut rows = vec![row(0.5, 10.0, 0.5), row(1.0, 20.0, 1.0), row(1.5, 40.0, 1.0)];
        assign_tau(&mut rows);
        assert_eq!(rows.iter().map(|r| r.tau).collect::<Vec<_>>(), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn best_theta_median_and_ties() {
        let rec = |theta, instance_id, its| SweepRecord {
            algorithm: Algorithm::Sequential,
            n: 3,
            instance_id,
            theta,
            mean_iterations: its,
            tau: 1.0,
            converged_fraction: 1.0,
        };
        let records = vec![
            rec(0.8, 0, 10.0), rec(0.8, 1, 30.0),
            rec(1.0, 0, 20.0), rec(1.0, 1, 20.0),
            rec(1.4, 0, 5.0), rec(1.4, 1, 100.0),
        ];
        let best = best_theta(&records).unwrap();
        // medians: 0.8 -> 20, 1.0 -> 20, 1.4 -> 52.5; tie goes to 1.0
        assert_eq!(best, vec![BestTheta { algorithm: Algorithm::Sequential, n: 3, best_theta: 1.0, median_iterations: 20.0 }]);
        assert!(best_theta(&[]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let rec = |its| CompareRecord {
            algorithm: Algorithm::Complete,
            n: 4,
            instance_id: 0,
            pierra_angle_rad: 0.3,
            theta_used: 1.0,
            mean_iterations: its,
        };
        assert_eq!(aggregate_by_n(&[rec(12.5)])[0].mean_iterations, 12.5);
        assert_eq!(aggregate_by_n(&[rec(7.0), rec(7.0), rec(7.0)])[0].mean_iterations, 7.0);
    }

    #[test]
    fn compare_requires_every_theta() {
        let cfg = small(1);
        let mut table = ThetaTable::new();
        table.insert((Algorithm::Complete, 3), 1.0);
        assert!(compare(&cfg, &table).is_err());
        table.insert((Algorithm::GeneralizedRyu, 3), 1.9);
        let rows = compare(&cfg, &table).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.pierra_angle_rad > 0.0 && r.pierra_angle_rad <= std::f64::consts::FRAC_PI_2));
    }
}
