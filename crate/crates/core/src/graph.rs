//! Algorithm graphs `(G, G')` and the quantities the splitting iteration
//! derives from them.
//!
//! Nodes are 0-based here: the edge `(0, 1)` joins the first and second
//! subspaces. Every edge `(i, j)` must satisfy `i < j`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::dense::{sorted_svd, symmetric_eigen};

/// The six named graph configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sequential,
    Complete,
    ParallelDown,
    ParallelUp,
    MalitskyTam,
    GeneralizedRyu,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sequential,
        Algorithm::Complete,
        Algorithm::ParallelDown,
        Algorithm::ParallelUp,
        Algorithm::MalitskyTam,
        Algorithm::GeneralizedRyu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sequential => "sequential",
            Algorithm::Complete => "complete",
            Algorithm::ParallelDown => "parallel_down",
            Algorithm::ParallelUp => "parallel_up",
            Algorithm::MalitskyTam => "malitsky_tam",
            Algorithm::GeneralizedRyu => "generalized_ryu",
        }
    }

    /// Whether the configuration uses the same graph for `G` and `G'`.
    pub fn same_graphs(self) -> bool {
        !matches!(self, Algorithm::MalitskyTam | Algorithm::GeneralizedRyu)
    }

    pub fn graph(self, n: usize) -> Result<AlgorithmGraph> {
        AlgorithmGraph::named(self, n)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Label of an [`AlgorithmGraph`]: one of the named configurations or a
/// user-supplied pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphName {
    Named(Algorithm),
    Custom,
}

impl fmt::Display for GraphName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphName::Named(a) => a.fmt(f),
            GraphName::Custom => f.write_str("custom"),
        }
    }
}

pub type Edge = (usize, usize);

/// An order-preserving connected graph `G` together with a connected spanning
/// subgraph `G'`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgorithmGraph {
    n: usize,
    edges_g: Vec<Edge>,
    edges_gp: Vec<Edge>,
    name: GraphName,
}

impl AlgorithmGraph {
    /// Table of named configurations.
    pub fn named(alg: Algorithm, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("algorithm graphs need at least two nodes"));
        }
        let sequential: Vec<Edge> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let complete: Vec<Edge> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let down: Vec<Edge> = (0..n - 1).map(|i| (i, n - 1)).collect();
        let up: Vec<Edge> = (1..n).map(|i| (0, i)).collect();
        let (g, gp) = match alg {
            Algorithm::Sequential => (sequential.clone(), sequential),
            Algorithm::Complete => (complete.clone(), complete),
            Algorithm::ParallelDown => (down.clone(), down),
            Algorithm::ParallelUp => (up.clone(), up),
            Algorithm::MalitskyTam => {
                let mut ring = sequential.clone();
                ring.push((0, n - 1));
                (ring, sequential)
            }
            Algorithm::GeneralizedRyu => (complete, down),
        };
        Self::build(n, g, gp, GraphName::Named(alg))
    }

    /// A user-supplied pair. Edges are 0-based.
    pub fn custom(n: usize, edges_g: Vec<Edge>, edges_gp: Vec<Edge>) -> Result<Self> {
        Self::build(n, edges_g, edges_gp, GraphName::Custom)
    }

    fn build(n: usize, edges_g: Vec<Edge>, edges_gp: Vec<Edge>, name: GraphName) -> Result<Self> {
        if n < 2 {
            return Err(invalid("algorithm graphs need at least two nodes"));
        }
        let dedup = |edges: Vec<Edge>| -> Vec<Edge> {
            let mut seen = BTreeSet::new();
            edges.into_iter().filter(|e| seen.insert(*e)).collect()
        };
        let edges_g = dedup(edges_g);
        let edges_gp = dedup(edges_gp);
        for &(i, j) in edges_g.iter().chain(&edges_gp) {
            if j >= n {
                return Err(invalid(format!("edge ({i}, {j}) references a node outside 0..{n}")));
            }
            if i >= j {
                return Err(invalid(format!("edge ({i}, {j}) does not preserve the node order")));
            }
        }
        let g_set: BTreeSet<Edge> = edges_g.iter().copied().collect();
        if let Some(e) = edges_gp.iter().find(|e| !g_set.contains(e)) {
            return Err(invalid(format!("subgraph edge {e:?} is not an edge of G")));
        }
        if !is_connected(n, &edges_g) {
            return Err(Error::Disconnected("G is not connected".into()));
        }
        if !is_connected(n, &edges_gp) {
            return Err(Error::Disconnected("G' does not connect all nodes".into()));
        }
        Ok(Self { n, edges_g, edges_gp, name })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges_g
    }

    pub fn subgraph_edges(&self) -> &[Edge] {
        &self.edges_gp
    }

    pub fn name(&self) -> GraphName {
        self.name
    }

    /// Laplacian of `G'`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges_gp {
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
            l[(i, j)] -= 1.0;
            l[(j, i)] -= 1.0;
        }
        l
    }

    /// In-degree and out-degree of every node in `G`.
    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut d_in = vec![0; self.n];
        let mut d_out = vec![0; self.n];
        for &(i, j) in &self.edges_g {
            d_out[i] += 1;
            d_in[j] += 1;
        }
        (d_in, d_out)
    }

    /// `delta_i = d_i^in - d_i^out` in `G`.
    pub fn degree_balance(&self) -> Vec<i64> {
        let (d_in, d_out) = self.degrees();
        d_in.iter().zip(&d_out).map(|(&a, &b)| a as i64 - b as i64).collect()
    }
}

fn is_connected(n: usize, edges: &[Edge]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for &(i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            components -= 1;
        }
    }
    components == 1
}

/// Full-rank factor `Z` (`n x (n-1)`) with `Z Z^T = L`.
///
/// Built from the eigendecomposition of `L`: columns follow descending
/// eigenvalue and each eigenvector is signed so its first nonzero entry is
/// positive.
pub fn factor_z(laplacian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = laplacian.nrows();
    if n < 2 || laplacian.ncols() != n {
        return Err(invalid("laplacian must be square with at least two rows"));
    }
    if (laplacian - laplacian.transpose()).amax() > 1e-12 {
        return Err(invalid("laplacian is not symmetric"));
    }
    let (values, vectors) = symmetric_eigen(laplacian);
    let order: Vec<usize> = (0..n).rev().collect();
    let top = values[order[0]].max(0.0);
    let rank = order.iter().filter(|&&k| values[k] > 1e-10 * top.max(1.0)).count();
    if rank != n - 1 {
        return Err(Error::Disconnected(format!("laplacian has rank {rank}, expected {}", n - 1)));
    }
    let mut z = DMatrix::zeros(n, n - 1);
    for (col, &k) in order.iter().take(n - 1).enumerate() {
        let q = vectors.column(k);
        let sign = q.iter().find(|v| v.abs() > 1e-10).map_or(1.0, |v| v.signum());
        let scale = sign * values[k].sqrt();
        z.column_mut(col).copy_from(&(q * scale));
    }
    Ok(z)
}

/// Least-squares solution of `Z alpha = delta`, rejected when the residual
/// exceeds `1e-8`.
pub fn solve_alpha(z: &DMatrix<f64>, delta: &[i64]) -> Result<DVector<f64>> {
    if delta.len() != z.nrows() {
        return Err(Error::DimensionMismatch { expected: z.nrows(), got: delta.len() });
    }
    let rhs = DVector::from_iterator(delta.len(), delta.iter().map(|&d| d as f64));
    let (u, sigma, v) = sorted_svd(z);
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut coeffs = u.tr_mul(&rhs);
    for (c, &s) in coeffs.iter_mut().zip(&sigma) {
        *c = if s > 1e-10 * top { *c / s } else { 0.0 };
    }
    let alpha = v * coeffs;
    let residual = (z * &alpha - rhs).norm();
    if residual > 1e-8 {
        return Err(Error::InconsistentSystem { residual });
    }
    Ok(alpha)
}

/// All per-graph precomputations needed by the iteration and the limit
/// formulas.
#[derive(Debug, Clone)]
pub struct SplittingOperator {
    graph: AlgorithmGraph,
    d_in: Vec<usize>,
    d_out: Vec<usize>,
    in_neighbors: Vec<Vec<usize>>,
    laplacian: DMatrix<f64>,
    z: DMatrix<f64>,
    delta: Vec<i64>,
    alpha: DVector<f64>,
}

impl SplittingOperator {
    pub fn new(graph: AlgorithmGraph) -> Result<Self> {
        let laplacian = graph.laplacian();
        let z = factor_z(&laplacian)?;
        Self::assemble(graph, laplacian, z)
    }

    pub fn named(alg: Algorithm, n: usize) -> Result<Self> {
        Self::new(AlgorithmGraph::named(alg, n)?)
    }

    /// The same operator with `Z` replaced by `Z O` for an orthogonal `O`.
    pub fn regauged(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        let m = self.z.ncols();
        if rotation.shape() != (m, m) {
            return Err(invalid(format!("gauge matrix must be {m}x{m}")));
        }
        if (rotation.tr_mul(rotation) - DMatrix::identity(m, m)).norm() > 1e-10 {
            return Err(invalid("gauge matrix is not orthogonal"));
        }
        Self::assemble(self.graph.clone(), self.laplacian.clone(), &self.z * rotation)
    }

    fn assemble(graph: AlgorithmGraph, laplacian: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let (d_in, d_out) = graph.degrees();
        let mut in_neighbors = vec![Vec::new(); graph.n()];
        for &(h, i) in graph.edges() {
            in_neighbors[i].push(h);
        }
        for list in &mut in_neighbors {
            list.sort_unstable();
        }
        let delta = graph.degree_balance();
        let alpha = solve_alpha(&z, &delta)?;
        Ok(Self { graph, d_in, d_out, in_neighbors, laplacian, z, delta, alpha })
    }

    pub fn graph(&self) -> &AlgorithmGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn d_in(&self) -> &[usize] {
        &self.d_in
    }

    pub fn d_out(&self) -> &[usize] {
        &self.d_out
    }

    /// Total degree `d_i` of node `i` in `G`.
    pub fn degree(&self, i: usize) -> usize {
        self.d_in[i] + self.d_out[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn delta(&self) -> &[i64] {
        &self.delta
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}
