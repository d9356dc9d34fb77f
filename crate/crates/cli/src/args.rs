//! Command-line flags, the JSON config file that mirrors them, and their
//! merge into library configuration.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphdr::harness::default_theta_grid;
use graphdr::{Algorithm, DimMode, ExperimentConfig, RunConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "graphdr", version, about = "Graph-based Douglas-Rachford splitting on linear subspaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or load) one problem, solve it and report oracle agreement as JSON.
    Solve(SolveArgs),
    /// Two-line Douglas-Rachford trajectory as CSV.
    DemoSpiral(SpiralArgs),
    /// Iteration counts over the relaxation-parameter grid, with performance ratios.
    SweepTheta(ExperimentArgs),
    /// Best relaxation parameter per (algorithm, n) from a sweep CSV.
    BestTheta(TableArgs),
    /// Product-space angle versus iterations at the best relaxation parameters.
    Compare(ExperimentArgs),
    /// Mean iterations per (algorithm, n) from a compare CSV.
    Aggregate(TableArgs),
    /// Re-hash the files named in a manifest.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimModeArg {
    Generic,
    CommonCore,
}

/// Flags shared by `solve`, `sweep-theta` and `compare`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Ambient dimension.
    #[arg(long)]
    pub p: Option<usize>,
    /// Comma list of node counts; `a-b` expands to a range.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma list of algorithm names, or `all`.
    #[arg(long)]
    pub alg: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "dim-mode", value_enum)]
    pub dim_mode: Option<DimModeArg>,
    #[arg(long = "d-min")]
    pub d_min: Option<usize>,
    #[arg(long = "d-max")]
    pub d_max: Option<usize>,
    #[arg(long = "core-dim")]
    pub core_dim: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON file whose keys mirror the flags; flags win on conflict.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub theta: Option<f64>,
    /// JSON problem file (see README) instead of a generated problem.
    #[arg(long)]
    pub problem: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpiralArgs {
    /// Angle between the two lines, in radians.
    #[arg(long, default_value_t = graphdr::engine::DEFAULT_SPIRAL_ANGLE)]
    pub angle: f64,
    #[arg(long, default_value_t = RunConfig::DEFAULT_TOL)]
    pub tol: f64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma list of relaxation parameters (sweep grid, or one value for every cell in compare).
    #[arg(long = "theta-grid")]
    pub theta_grid: Option<String>,
    /// Single relaxation parameter for every algorithm (compare only).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    /// Best-theta CSV supplying per-(algorithm, n) parameters (compare only).
    #[arg(long)]
    pub best: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Custom graph pair with 1-based edges, as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub subgraph_edges: Vec<(usize, usize)>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub p: Option<usize>,
    pub n: Option<NodeList>,
    pub alg: Option<String>,
    pub theta: Option<f64>,
    pub theta_grid: Option<Vec<f64>>,
    pub instances: Option<usize>,
    pub starts: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub dim_mode: Option<DimModeArg>,
    pub d_min: Option<usize>,
    pub d_max: Option<usize>,
    pub core_dim: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub best: Option<PathBuf>,
    pub problem: Option<PathBuf>,
    pub graph: Option<GraphSpec>,
}

/// `n` in a config file: a single count, a list, or a flag-style string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeList {
    One(usize),
    Many(Vec<usize>),
    Text(String),
}

impl NodeList {
    fn resolve(&self) -> Result<Vec<usize>, CliError> {
        match self {
            NodeList::One(n) => Ok(vec![*n]),
            NodeList::Many(v) => Ok(v.clone()),
            NodeList::Text(s) => parse_node_list(s),
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn parse_node_list(s: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Usage(format!("invalid node count `{part}`"));
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty node list".into()));
    }
    Ok(out)
}

pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>, CliError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut algs = Vec::new();
    for name in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let alg: Algorithm = name.parse().map_err(|e: graphdr::Error| CliError::Usage(e.to_string()))?;
        if !algs.contains(&alg) {
            algs.push(alg);
        }
    }
    if algs.is_empty() {
        return Err(CliError::Usage("no algorithms given".into()));
    }
    Ok(algs)
}

pub fn parse_theta_list(s: &str) -> Result<Vec<f64>, CliError> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| CliError::Usage(format!("invalid theta `{p}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("empty theta grid".into()));
    }
    Ok(values)
}

/// Flags merged over the config file, before defaults.
#[derive(Debug, Clone)]
pub struct Merged {
    pub file: FileConfig,
    pub p: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub alg: Option<Vec<Algorithm>>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Merged {
    pub fn new(common: &CommonArgs) -> Result<Self, CliError> {
        let file = FileConfig::load(common.config.as_deref())?;
        let n = match (&common.n, &file.n) {
            (Some(s), _) => Some(parse_node_list(s)?),
            (None, Some(list)) => Some(list.resolve()?),
            (None, None) => None,
        };
        let alg = common.alg.as_deref().or(file.alg.as_deref()).map(parse_algorithms).transpose()?;
        Ok(Self {
            p: common.p.or(file.p),
            n,
            alg,
            tol: common.tol.or(file.tol),
            max_iters: common.max_iters.or(file.max_iters),
            seed: common.seed.or(file.seed),
            jobs: common.jobs.or(file.jobs),
            file,
        })
    }

    pub fn dim_mode(&self, common: &CommonArgs, p: usize) -> Result<DimMode, CliError> {
        let kind = common.dim_mode.or(self.file.dim_mode).unwrap_or(DimModeArg::Generic);
        let default = match DimMode::default_for(p) {
            DimMode::Generic { d_min, d_max } => (d_min, d_max),
            DimMode::CommonCore { d_min, d_max, .. } => (d_min, d_max),
        };
        let d_min = common.d_min.or(self.file.d_min).unwrap_or(default.0);
        let d_max = common.d_max.or(self.file.d_max).unwrap_or(default.1.max(d_min));
        Ok(match kind {
            DimModeArg::Generic => {
                if common.core_dim.or(self.file.core_dim).is_some() {
                    return Err(CliError::Usage("--core-dim needs --dim-mode common-core".into()));
                }
                DimMode::Generic { d_min, d_max }
            }
            DimModeArg::CommonCore => {
                let core_dim = common
                    .core_dim
                    .or(self.file.core_dim)
                    .ok_or_else(|| CliError::Usage("--dim-mode common-core needs --core-dim".into()))?;
                DimMode::CommonCore { core_dim, d_min, d_max }
            }
        })
    }
}

/// Experiment configuration from flags, config file and `defaults`. The seed
/// is mandatory.
pub fn experiment_config(
    args: &ExperimentArgs,
    merged: &Merged,
    defaults: fn(u64) -> ExperimentConfig,
) -> Result<ExperimentConfig, CliError> {
    let seed = merged
        .seed
        .ok_or_else(|| CliError::Usage("experiment subcommands require --seed".into()))?;
    let defaults = defaults(seed);
    let p = merged.p.unwrap_or(defaults.p);
    let theta_grid = match (&args.theta_grid, &merged.file.theta_grid) {
        (Some(s), _) => parse_theta_list(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => default_theta_grid(),
    };
    let config = ExperimentConfig {
        p,
        n_values: merged.n.clone().unwrap_or(defaults.n_values),
        instances_per_n: args.instances.or(merged.file.instances).unwrap_or(defaults.instances_per_n),
        starts_per_instance: args.starts.or(merged.file.starts).unwrap_or(defaults.starts_per_instance),
        theta_grid,
        algorithms: merged.alg.clone().unwrap_or(defaults.algorithms),
        tol: merged.tol.unwrap_or(defaults.tol),
        max_iters: merged.max_iters.unwrap_or(defaults.max_iters),
        master_seed: seed,
        dim_mode: merged.dim_mode(&args.common, p)?,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}
