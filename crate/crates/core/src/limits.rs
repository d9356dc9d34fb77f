//! Closed-form limits of the splitting iteration on linear subspaces.
//!
//! For the graph iteration started at `v^0` the governing limit is
//! `v* = (a_1 x*, ..., a_{n-1} x*) + P_E(v^0)` and the shadow limit is
//! `x* = P_{∩U_i}(sum_j a_j v^0_j / ||a||^2)`, where `E` is the subspace of
//! governing tuples `e` with `sum_j Z_ij e_j ⟂ U_i` for every node and `a`
//! solves `Z a = d^out - d^in`.
//!
//! The operator stores `alpha` with `Z alpha = d^in - d^out`, so `a = -alpha`.
//! Only `x*` depends on that sign (`a_j x*` does not), and the fixed-point
//! equation `d_i x* = 2 d_i^in x* + P_{U_i}(sum_j Z_ij v*_j)` pins it down.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::graph::SplittingOperator;
use crate::subspace::{intersect_many, null_space, Problem, Subspace, RANK_TOL};

/// Closed-form limits for one starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitData {
    pub x_star: DVector<f64>,
    /// `p x (n-1)`, one governing block per column.
    pub v_star: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub e_basis: Subspace,
}

/// The subspace `E` of `(R^p)^{n-1}`, as the null space of the stacked
/// `pn x p(n-1)` map with blocks `Z_ij B_i B_i^T`.
pub fn build_e(problem: &Problem, op: &SplittingOperator) -> Result<Subspace> {
    check_dim(problem.len(), op.n())?;
    let (p, n) = (problem.ambient_dim(), op.n());
    let m = n - 1;
    let mut c = DMatrix::zeros(p * n, p * m);
    for (i, u) in problem.subspaces().iter().enumerate() {
        let proj = u.basis() * u.basis().transpose();
        for j in 0..m {
            let zij = op.z()[(i, j)];
            if zij != 0.0 {
                c.view_mut((i * p, j * p), (p, p)).copy_from(&(&proj * zij));
            }
        }
    }
    Ok(Subspace::from_basis_unchecked(null_space(&c, RANK_TOL)))
}

/// Per-(problem, graph) precomputation: the intersection of the sets and the
/// subspace `E`. Reused across starting points and relaxation parameters.
#[derive(Debug, Clone)]
pub struct LimitOracle {
    p: usize,
    intersection: Subspace,
    e: Subspace,
    alpha: DVector<f64>,
    coeffs: DVector<f64>,
}

impl LimitOracle {
    pub fn new(problem: &Problem, op: &SplittingOperator) -> Result<Self> {
        check_dim(problem.len(), op.n())?;
        let alpha = op.alpha().clone();
        let norm_sq = alpha.norm_squared();
        if !(norm_sq > 1e-24) {
            return Err(Error::DegenerateAlpha);
        }
        Ok(Self {
            p: problem.ambient_dim(),
            intersection: intersect_many(problem.subspaces(), RANK_TOL)?,
            e: build_e(problem, op)?,
            coeffs: -&alpha,
            alpha,
        })
    }

    pub fn intersection(&self) -> &Subspace {
        &self.intersection
    }

    pub fn e(&self) -> &Subspace {
        &self.e
    }

    /// Limits for the start `v0` (`p x (n-1)`).
    pub fn limits(&self, v0: &DMatrix<f64>) -> Result<LimitData> {
        check_dim(self.p, v0.nrows())?;
        check_dim(self.alpha.len(), v0.ncols())?;
        let weighted = v0 * &self.coeffs / self.coeffs.norm_squared();
        let x_star = self.intersection.project_unchecked(&weighted);

        let stacked = DVector::from_column_slice(v0.as_slice());
        let pe = self.e.project_unchecked(&stacked);
        let mut v_star = DMatrix::from_column_slice(self.p, v0.ncols(), pe.as_slice());
        for (j, &a) in self.coeffs.iter().enumerate() {
            v_star.column_mut(j).axpy(a, &x_star, 1.0);
        }
        Ok(LimitData { x_star, v_star, alpha: self.alpha.clone(), e_basis: self.e.clone() })
    }
}

/// One-shot form of [`LimitOracle::limits`].
pub fn explicit_limits(problem: &Problem, op: &SplittingOperator, v0: &DMatrix<f64>) -> Result<LimitData> {
    LimitOracle::new(problem, op)?.limits(v0)
}

/// Two-set limit `P_{U1∩U2}(v0) + P_{U1^⊥∩U2^⊥}(v0)`.
pub fn dr_limit_two(u1: &Subspace, u2: &Subspace, v0: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(u1.ambient_dim(), u2.ambient_dim())?;
    check_dim(u1.ambient_dim(), v0.len())?;
    let inner = intersect_many(&[u1.clone(), u2.clone()], RANK_TOL)?;
    let outer = intersect_many(&[u1.complement(), u2.complement()], RANK_TOL)?;
    Ok(inner.project_unchecked(v0) + outer.project_unchecked(v0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Algorithm;
    use crate::subspace::orthonormalize;

    fn line(x: f64, y: f64) -> Subspace {
        orthonormalize(&DMatrix::from_column_slice(2, 1, &[x, y]), RANK_TOL).unwrap()
    }

    #[test]
    fn e_is_trivial_for_full_sets() {
        let problem = Problem::new(vec![Subspace::full(3), Subspace::full(3)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        assert!(build_e(&problem, &op).unwrap().is_trivial());
    }

    #[test]
    fn e_for_two_sets_is_intersection_of_complements() {
        // With Z = (1,-1)^T, E = {e : e ⟂ U1, -e ⟂ U2} = U1^⊥ ∩ U2^⊥.
        let u1 = orthonormalize(&DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), RANK_TOL).unwrap();
        let u2 = orthonormalize(&DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]), RANK_TOL).unwrap();
        let problem = Problem::new(vec![u1.clone(), u2.clone()]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let e = build_e(&problem, &op).unwrap();
        let expected = intersect_many(&[u1.complement(), u2.complement()], RANK_TOL).unwrap();
        assert_eq!(e.dim(), 1);
        assert!(e.same_span(&expected, 1e-12));

        // rank-nullity: dim E = p(n-1) - rank(C) with rank(C) = 2 here.
        assert_eq!(e.dim(), 3 - 2);
    }

    #[test]
    fn zero_start_has_zero_limits() {
        let problem = Problem::new(vec![line(1.0, 0.0), line(1.0, 1.0), line(0.0, 1.0)]).unwrap();
        let op = SplittingOperator::named(Algorithm::Complete, 3).unwrap();
        let lim = explicit_limits(&problem, &op, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(lim.x_star.norm(), 0.0);
        assert_eq!(lim.v_star.norm(), 0.0);
    }

    #[test]
    fn two_set_limit_examples() {
        let v0 = DVector::from_vec(vec![1.0, 0.0]);
        let v = dr_limit_two(&line(1.0, 0.0), &line(1.0, 1.0), &v0).unwrap();
        assert!(v.norm() < 1e-15);

        let u = orthonormalize(&DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]), RANK_TOL).unwrap();
        let v0 = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let v = dr_limit_two(&u, &u, &v0).unwrap();
        assert!((v - v0).norm() < 1e-12);
    }

    #[test]
    fn two_set_formula_is_the_sequential_special_case() {
        let u1 = orthonormalize(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), RANK_TOL).unwrap();
        let u2 = orthonormalize(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]), RANK_TOL).unwrap();
        let problem = Problem::new(vec![u1.clone(), u2.clone()]).unwrap();
        let op = SplittingOperator::named(Algorithm::Sequential, 2).unwrap();
        let v0 = DVector::from_vec(vec![0.7, -0.2, 1.5]);
        let lim = explicit_limits(&problem, &op, &DMatrix::from_column_slice(3, 1, v0.as_slice())).unwrap();
        let two = dr_limit_two(&u1, &u2, &v0).unwrap();
        assert!((lim.v_star.column(0) - &two).norm() < 1e-10);
        // x* = P_{U1∩U2}(v0) = the x-axis component.
        assert!((lim.x_star - DVector::from_vec(vec![0.7, 0.0, 0.0])).norm() < 1e-12);
    }
}
