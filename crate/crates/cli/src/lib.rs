//! Command-line front end for the `graphdr` library.

pub mod args;
pub mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use graphdr::harness::{derive_seed, random_start, theta_table};
use graphdr::{
    aggregate_by_n, best_theta, compare, demo_spiral, generate_problem, run, run_until_stationary, theta_sweep,
    AggregateRecord, Algorithm, AlgorithmGraph, BestTheta, CompareRecord, ExperimentConfig, LimitOracle,
    Problem, RunConfig, SplittingOperator, Subspace, SweepRecord, RANK_TOL,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::{experiment_config, Cli, Command, ExperimentArgs, GraphSpec, Merged, SolveArgs, SpiralArgs, TableArgs};
use crate::output::{
    check_writable, csv_bytes, fmt_g17, manifest_path, read_csv, verify_manifest, write_atomic, HashedFile, Manifest,
};

pub const SWEEP_HEADER: [&str; 7] =
    ["algorithm", "n", "instance_id", "theta", "mean_iterations", "tau", "converged_fraction"];
pub const COMPARE_HEADER: [&str; 6] =
    ["algorithm", "n", "instance_id", "pierra_angle_rad", "theta_used", "mean_iterations"];
pub const BEST_HEADER: [&str; 4] = ["algorithm", "n", "best_theta", "median_iterations"];
pub const AGGREGATE_HEADER: [&str; 3] = ["algorithm", "n", "mean_iterations"];
pub const SPIRAL_HEADER: [&str; 9] = ["k", "v_x", "v_y", "x1_x", "x1_y", "x2_x", "x2_y", "dist_v", "dist_x"];

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input contents. Exit code 1.
    Usage(String),
    /// Filesystem trouble. Exit code 1.
    Io(String),
    /// `solve` stopped at the iteration cap. Exit code 2.
    NotConverged(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::NotConverged(_) => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<graphdr::Error> for CliError {
    fn from(e: graphdr::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Executes one parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::DemoSpiral(a) => cmd_spiral(&a),
        Command::SweepTheta(a) => cmd_sweep(&a),
        Command::BestTheta(a) => cmd_best(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Aggregate(a) => cmd_aggregate(&a),
        Command::Verify(a) => cmd_verify(&a.manifest),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Sends `bytes` to `out` (atomically, with a manifest) or to stdout.
fn emit(
    out: Option<&Path>,
    bytes: &[u8],
    subcommand: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    jobs: usize,
    started: Instant,
) -> Result<(), CliError> {
    let rows = bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
    let elapsed = started.elapsed().as_secs_f64();
    let Some(out) = out else {
        eprintln!("{subcommand}: {rows} rows in {elapsed:.2}s");
        return print_stdout(bytes);
    };
    write_atomic(out, bytes)?;
    let manifest = Manifest {
        tool: "graphdr".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        config,
        inputs: inputs.iter().map(|p| HashedFile::of(p)).collect::<Result<_, _>>()?,
        outputs: vec![HashedFile::of(out)?],
        jobs,
        wall_time_seconds: elapsed,
    };
    let text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&manifest_path(out), &text)?;
    eprintln!("{subcommand}: {rows} rows in {elapsed:.2}s -> {}", out.display());
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn precheck(out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => check_writable(p),
        None => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

pub fn sweep_rows(records: &[SweepRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.algorithm.name().into(),
                r.n.to_string(),
                r.instance_id.to_string(),
                fmt_g17(r.theta),
                fmt_g17(r.mean_iterations),
                fmt_g17(r.tau),
                fmt_g17(r.converged_fraction),
            ]
        })
        .collect()
}

pub fn compare_rows(records: &[CompareRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.algorithm.name().into(),
                r.n.to_string(),
                r.instance_id.to_string(),
                fmt_g17(r.pierra_angle_rad),
                fmt_g17(r.theta_used),
                fmt_g17(r.mean_iterations),
            ]
        })
        .collect()
}

fn best_rows(records: &[BestTheta]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| vec![r.algorithm.name().into(), r.n.to_string(), fmt_g17(r.best_theta), fmt_g17(r.median_iterations)])
        .collect()
}

fn aggregate_rows(records: &[AggregateRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| vec![r.algorithm.name().into(), r.n.to_string(), fmt_g17(r.mean_iterations)])
        .collect()
}

fn cmd_sweep(args: &ExperimentArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let merged = Merged::new(&args.common)?;
    if args.theta.is_some() || args.best.is_some() {
        return Err(CliError::Usage("sweep-theta takes --theta-grid, not --theta or --best".into()));
    }
    let config = experiment_config(args, &merged, ExperimentConfig::sweep_defaults)?;
    let out = args.out.clone().or(merged.file.out.clone());
    precheck(out.as_deref())?;
    let pool = thread_pool(merged.jobs)?;
    let records = pool.install(|| theta_sweep(&config))?;
    let bytes = csv_bytes(&SWEEP_HEADER, sweep_rows(&records))?;
    emit(out.as_deref(), &bytes, "sweep-theta", to_json(&config), &[], pool.current_num_threads(), started)
}

fn cmd_best(args: &TableArgs) -> Result<(), CliError> {
    let started = Instant::now();
    precheck(args.out.as_deref())?;
    let records: Vec<SweepRecord> = read_csv(&args.input, &SWEEP_HEADER)?;
    let best = best_theta(&records)?;
    let bytes = csv_bytes(&BEST_HEADER, best_rows(&best))?;
    let config = serde_json::json!({ "in": args.input });
    emit(args.out.as_deref(), &bytes, "best-theta", config, &[&args.input], 1, started)
}

fn cmd_compare(args: &ExperimentArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let merged = Merged::new(&args.common)?;
    let config = experiment_config(args, &merged, ExperimentConfig::compare_defaults)?;
    let best_path = args.best.clone().or(merged.file.best.clone());
    let theta = args.theta.or(merged.file.theta);
    let table = match (&best_path, theta) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --best or --theta, not both".into())),
        (None, None) => return Err(CliError::Usage("compare needs --best FILE or --theta".into())),
        (Some(path), None) => theta_table(&read_csv::<BestTheta>(path, &BEST_HEADER)?),
        (None, Some(t)) => {
            RunConfig::new(t)?;
            config
                .algorithms
                .iter()
                .flat_map(|&a| config.n_values.iter().map(move |&n| ((a, n), t)))
                .collect()
        }
    };
    let out = args.out.clone().or(merged.file.out.clone());
    precheck(out.as_deref())?;
    let pool = thread_pool(merged.jobs)?;
    let records = pool.install(|| compare(&config, &table))?;
    let bytes = csv_bytes(&COMPARE_HEADER, compare_rows(&records))?;
    let mut echo = to_json(&config);
    echo["theta"] = serde_json::json!(theta);
    let inputs: Vec<&Path> = best_path.iter().map(PathBuf::as_path).collect();
    emit(out.as_deref(), &bytes, "compare", echo, &inputs, pool.current_num_threads(), started)
}

fn cmd_aggregate(args: &TableArgs) -> Result<(), CliError> {
    let started = Instant::now();
    precheck(args.out.as_deref())?;
    let records: Vec<CompareRecord> = read_csv(&args.input, &COMPARE_HEADER)?;
    if records.is_empty() {
        return Err(CliError::Usage(format!("{}: no rows", args.input.display())));
    }
    let bytes = csv_bytes(&AGGREGATE_HEADER, aggregate_rows(&aggregate_by_n(&records)))?;
    let config = serde_json::json!({ "in": args.input });
    emit(args.out.as_deref(), &bytes, "aggregate", config, &[&args.input], 1, started)
}

fn cmd_spiral(args: &SpiralArgs) -> Result<(), CliError> {
    let started = Instant::now();
    precheck(args.out.as_deref())?;
    let demo = demo_spiral(args.angle, args.tol)?;
    let rows = demo.points.iter().map(|pt| {
        let mut row = vec![pt.k.to_string()];
        row.extend([pt.v[0], pt.v[1], pt.x1[0], pt.x1[1], pt.x2[0], pt.x2[1], pt.dist_v, pt.dist_x].map(fmt_g17));
        row
    });
    let bytes = csv_bytes(&SPIRAL_HEADER, rows)?;
    let config = serde_json::json!({ "angle": args.angle, "tol": args.tol });
    emit(args.out.as_deref(), &bytes, "demo-spiral", config, &[], 1, started)
}

fn cmd_verify(path: &Path) -> Result<(), CliError> {
    let v = verify_manifest(path)?;
    if v.mismatches.is_empty() {
        print_stdout(format!("ok: {} files match\n", v.checked).as_bytes())
    } else {
        for m in &v.mismatches {
            eprintln!("mismatch: {m}");
        }
        Err(CliError::Io(format!("{} of {} files differ from the manifest", v.mismatches.len(), v.checked)))
    }
}

/// Problem file: each subspace given by spanning vectors of equal length.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub subspaces: Vec<Vec<Vec<f64>>>,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Problem, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: ProblemFile =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        file.to_problem()
    }

    pub fn to_problem(&self) -> Result<Problem, CliError> {
        let p = self
            .subspaces
            .iter()
            .flatten()
            .map(Vec::len)
            .next()
            .ok_or_else(|| CliError::Usage("problem file lists no vectors".into()))?;
        let sets = self
            .subspaces
            .iter()
            .map(|vectors| {
                if vectors.iter().any(|v| v.len() != p) {
                    return Err(CliError::Usage(format!("all vectors must have length {p}")));
                }
                let flat: Vec<f64> = vectors.iter().flatten().copied().collect();
                Ok(graphdr::orthonormalize(&DMatrix::from_column_slice(p, vectors.len(), &flat), RANK_TOL)?)
            })
            .collect::<Result<Vec<Subspace>, CliError>>()?;
        Ok(Problem::new(sets)?)
    }
}

/// JSON report printed by `solve`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub graph: String,
    pub p: usize,
    pub n: usize,
    pub theta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub stopping_rule: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    /// `||x - P_{U_i} x||` for each set, where `x` is the first final shadow.
    pub feasibility_errors: Vec<f64>,
    /// `max_i ||x_i - x*||`, when the limit is known.
    pub x_star_error: Option<f64>,
    pub intersection_dim: usize,
    pub subspace_dims: Vec<usize>,
}

fn graph_from_spec(spec: &GraphSpec) -> Result<AlgorithmGraph, CliError> {
    let shift = |edges: &[(usize, usize)]| {
        edges
            .iter()
            .map(|&(a, b)| {
                if a == 0 || b == 0 {
                    Err(CliError::Usage("graph edges use 1-based node labels".into()))
                } else {
                    Ok((a - 1, b - 1))
                }
            })
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(AlgorithmGraph::custom(spec.n, shift(&spec.edges)?, shift(&spec.subgraph_edges)?)?)
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let merged = Merged::new(&args.common)?;
    let file = &merged.file;
    let theta = args.theta.or(file.theta).unwrap_or(1.0);
    let tol = merged.tol.unwrap_or(RunConfig::DEFAULT_TOL);
    let max_iters = merged.max_iters.unwrap_or(RunConfig::DEFAULT_MAX_ITERS);
    let config = RunConfig::new(theta)?.with_tol(tol)?.with_max_iters(max_iters)?;
    let seed = merged.seed.unwrap_or_else(rand::random);

    let graph = match (&merged.alg, &file.graph) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --alg or a custom graph, not both".into())),
        (None, Some(spec)) => graph_from_spec(spec)?,
        (alg, None) => {
            let alg = match alg.as_deref() {
                None => Algorithm::Sequential,
                Some([one]) => *one,
                Some(_) => return Err(CliError::Usage("solve takes a single algorithm".into())),
            };
            let n = match merged.n.as_deref() {
                None => 3,
                Some([one]) => *one,
                Some(_) => return Err(CliError::Usage("solve takes a single --n".into())),
            };
            AlgorithmGraph::named(alg, n)?
        }
    };
    let n = graph.n();
    if merged.n.as_ref().is_some_and(|ns| ns != &[n]) {
        return Err(CliError::Usage(format!("--n disagrees with the graph on {n} nodes")));
    }

    let problem_path = args.problem.clone().or(file.problem.clone());
    let problem = match &problem_path {
        Some(path) => {
            if args.common.p.is_some() || args.common.dim_mode.is_some() {
                return Err(CliError::Usage("--problem fixes the subspaces; drop --p and --dim-mode".into()));
            }
            ProblemFile::load(path)?
        }
        None => {
            let p = merged.p.unwrap_or(50);
            let mode = merged.dim_mode(&args.common, p)?;
            generate_problem(p, n, mode, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0])))?
        }
    };
    if problem.len() != n {
        return Err(CliError::Usage(format!("problem has {} subspaces but the graph has {n} nodes", problem.len())));
    }
    let p = problem.ambient_dim();
    let v0 = random_start(p, n, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, 0])));
    let op = SplittingOperator::new(graph)?;

    let (result, x_star, rule) = match LimitOracle::new(&problem, &op) {
        Ok(oracle) => {
            let limits = oracle.limits(&v0)?;
            (run(&problem, &op, &config, &v0, &limits.v_star)?, Some(limits.x_star), "limit")
        }
        Err(graphdr::Error::DegenerateAlpha) => (run_until_stationary(&problem, &op, &config, &v0)?, None, "stationary"),
        Err(e) => return Err(e.into()),
    };

    let shadows = &result.shadows;
    let feasibility_errors =
        problem.subspaces().iter().map(|u| u.distance(&result.x_final).expect("dimensions match")).collect();
    let x_star_error =
        x_star.map(|xs| (0..n).map(|i| (shadows.column(i) - &xs).norm()).fold(0.0, f64::max));

    let report = SolveReport {
        graph: match op.graph().name() {
            graphdr::GraphName::Named(a) => a.name().into(),
            graphdr::GraphName::Custom => "custom".into(),
        },
        p,
        n,
        theta,
        tol,
        max_iters,
        seed,
        stopping_rule: rule.into(),
        iterations: result.iterations,
        converged: result.converged,
        final_residual: result.final_residual,
        feasibility_errors,
        x_star_error,
        intersection_dim: problem.intersection().dim(),
        subspace_dims: problem.subspaces().iter().map(Subspace::dim).collect(),
    };
    print_stdout(format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")).as_bytes())?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("{} iterations without reaching tol = {tol:e}", result.iterations)))
    }
}
