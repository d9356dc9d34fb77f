//! Linear subspaces of `R^p` stored by orthonormal basis, and the geometric
//! primitives built on them: projection, orthogonal complement, intersection,
//! principal angles and random sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{singular_values, sorted_svd};
use crate::error::{check_dim, invalid, Result};

/// Relative singular-value cutoff used for every rank decision in the crate.
pub const RANK_TOL: f64 = 1e-10;

/// A linear subspace of `R^p` held as a `p x d` matrix with orthonormal columns.
///
/// `d = 0` is the trivial subspace `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal. The caller's claim is checked
    /// to `1e-10` in Frobenius norm.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let p = basis.nrows();
        if p == 0 {
            return Err(invalid("ambient dimension must be positive"));
        }
        let gram = basis.transpose() * &basis;
        let defect = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).norm();
        if !(defect <= 1e-10) {
            return Err(invalid(format!("basis is not orthonormal (defect {defect:e})")));
        }
        Ok(Self { ambient_dim: p, basis })
    }

    pub(crate) fn from_basis_unchecked(basis: DMatrix<f64>) -> Self {
        Self { ambient_dim: basis.nrows(), basis }
    }

    /// The trivial subspace `{0}` of `R^p`.
    pub fn trivial(p: usize) -> Self {
        Self { ambient_dim: p, basis: DMatrix::zeros(p, 0) }
    }

    /// The whole space `R^p`.
    pub fn full(p: usize) -> Self {
        Self { ambient_dim: p, basis: DMatrix::identity(p, p) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection `B (B^T x)`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.ambient_dim, x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.is_trivial() {
            return DVector::zeros(self.ambient_dim);
        }
        &self.basis * (self.basis.tr_mul(x))
    }

    /// Projects every column of `m` (a `p x k` matrix) in place.
    pub(crate) fn project_columns_in_place(&self, m: &mut DMatrix<f64>) {
        if self.is_trivial() {
            m.fill(0.0);
            return;
        }
        let coeffs = self.basis.tr_mul(m);
        self.basis.mul_to(&coeffs, m);
    }

    /// Distance from `x` to the subspace.
    pub fn distance(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// Orthogonal complement `S^⊥`.
    pub fn complement(&self) -> Subspace {
        let p = self.ambient_dim;
        match self.dim() {
            0 => Subspace::full(p),
            d if d == p => Subspace::trivial(p),
            _ => Subspace::from_basis_unchecked(null_space(&self.basis.transpose(), RANK_TOL)),
        }
    }

    /// True when every basis column of `other` lies in `self` within `tol`.
    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        if self.ambient_dim != other.ambient_dim {
            return false;
        }
        if other.is_trivial() {
            return true;
        }
        let residual = if self.is_trivial() {
            other.basis.clone()
        } else {
            &other.basis - &self.basis * self.basis.tr_mul(&other.basis)
        };
        residual.column_iter().all(|c| c.norm() <= tol)
    }

    /// Same span, checked by mutual containment.
    pub fn same_span(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol) && other.contains(self, tol)
    }
}

/// Number of singular values above `tol` times the largest one.
fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().take_while(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub(crate) fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (m, k) = a.shape();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m == 0 {
        return DMatrix::identity(k, k);
    }
    // Pad short-wide inputs so V is square and spans all of R^k.
    let padded;
    let a = if m < k {
        padded = a.clone().resize_vertically(k, 0.0);
        &padded
    } else {
        a
    };
    let (_, sigma, v) = sorted_svd(a);
    let rank = numerical_rank(&sigma, tol);
    v.columns(rank, k - rank).into_owned()
}

/// Orthonormal basis for the column span of `vectors` (`p x m`). Rank is
/// decided by singular values above `tol` times the largest.
pub fn orthonormalize(vectors: &DMatrix<f64>, tol: f64) -> Result<Subspace> {
    let p = vectors.nrows();
    if p == 0 {
        return Err(invalid("ambient dimension must be positive"));
    }
    if !(tol > 0.0) {
        return Err(invalid("rank tolerance must be positive"));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite entry in input vectors"));
    }
    if vectors.ncols() == 0 {
        return Ok(Subspace::trivial(p));
    }
    let (u, sigma, _) = sorted_svd(vectors);
    let rank = numerical_rank(&sigma, tol);
    Ok(Subspace::from_basis_unchecked(u.columns(0, rank).into_owned()))
}

/// Intersection of all subspaces in `list`, as the complement of the span of
/// their complements.
pub fn intersect_many(list: &[Subspace], tol: f64) -> Result<Subspace> {
    let first = list.first().ok_or_else(|| invalid("cannot intersect an empty list"))?;
    let p = first.ambient_dim();
    for s in list {
        check_dim(p, s.ambient_dim())?;
    }
    if list.iter().any(Subspace::is_trivial) {
        return Ok(Subspace::trivial(p));
    }
    let complements: Vec<Subspace> = list.iter().map(Subspace::complement).collect();
    let total: usize = complements.iter().map(Subspace::dim).sum();
    let mut stacked = DMatrix::zeros(p, total);
    let mut col = 0;
    for c in &complements {
        stacked.columns_mut(col, c.dim()).copy_from(c.basis());
        col += c.dim();
    }
    Ok(orthonormalize(&stacked, tol)?.complement())
}

/// Principal angles between two nontrivial subspaces, ascending, in radians.
pub fn principal_angles(s1: &Subspace, s2: &Subspace) -> Result<Vec<f64>> {
    check_dim(s1.ambient_dim(), s2.ambient_dim())?;
    if s1.is_trivial() || s2.is_trivial() {
        return Err(invalid("principal angles need two nontrivial subspaces"));
    }
    let cross = s1.basis().tr_mul(s2.basis());
    let mut angles: Vec<f64> = singular_values(&cross)
        .iter()
        .map(|&c| c.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// A `d`-dimensional subspace of `R^p` drawn from the rotation-invariant
/// distribution (orthonormalized Gaussian sample).
pub fn random_subspace<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<Subspace> {
    if d == 0 || d >= p {
        return Err(invalid(format!("random subspace dimension {d} must lie in [1, {}]", p.saturating_sub(1))));
    }
    let sample = gaussian_matrix(p, d, rng);
    orthonormalize(&sample, RANK_TOL)
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Column-major fill keeps the draw order independent of nalgebra internals.
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// An instance of the feasibility problem: `n >= 2` subspaces of one `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    subspaces: Vec<Subspace>,
}

impl Problem {
    pub fn new(subspaces: Vec<Subspace>) -> Result<Self> {
        if subspaces.len() < 2 {
            return Err(invalid("a problem needs at least two subspaces"));
        }
        let p = subspaces[0].ambient_dim();
        for s in &subspaces {
            check_dim(p, s.ambient_dim())?;
        }
        Ok(Self { subspaces })
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspaces[0].ambient_dim()
    }

    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn subspace(&self, i: usize) -> &Subspace {
        &self.subspaces[i]
    }

    pub fn intersection(&self) -> Subspace {
        intersect_many(&self.subspaces, RANK_TOL).expect("problem subspaces share a dimension")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3};

    fn cols(p: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(p, data.len() / p, data)
    }

    fn line(x: f64, y: f64) -> Subspace {
        orthonormalize(&cols(2, &[x, y]), RANK_TOL).unwrap()
    }

    #[test]
    fn orthonormalize_drops_dependent_columns() {
        let s = orthonormalize(&cols(2, &[1.0, 0.0, 2.0, 0.0]), RANK_TOL).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.contains(&Subspace::from_orthonormal(cols(2, &[1.0, 0.0])).unwrap(), 1e-12));
    }

    #[test]
    fn orthonormalize_empty_and_identity() {
        let empty = orthonormalize(&DMatrix::zeros(3, 0), RANK_TOL).unwrap();
        assert!(empty.is_trivial());
        assert_eq!(empty.ambient_dim(), 3);
        let plane = orthonormalize(&DMatrix::identity(2, 2), RANK_TOL).unwrap();
        assert_eq!(plane.dim(), 2);
    }

    #[test]
    fn orthonormalize_rejects_nan() {
        let err = orthonormalize(&cols(2, &[f64::NAN, 1.0]), RANK_TOL).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidInput(_)));
    }

    #[test]
    fn projection_examples() {
        let x = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(line(1.0, 0.0).project(&x).unwrap(), DVector::from_vec(vec![3.0, 0.0]));
        assert_eq!(Subspace::trivial(2).project(&x).unwrap(), DVector::zeros(2));

        // rank-one oracle <x,u>u with u = (1,1)/sqrt2
        let u = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let expected = &u * x.dot(&u);
        let got = line(1.0, 1.0).project(&x).unwrap();
        assert!((got - expected).norm() < 1e-15);
        assert!((line(1.0, 1.0).project(&x).unwrap() - DVector::from_vec(vec![0.5, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn projection_dimension_mismatch() {
        let err = line(1.0, 0.0).project(&DVector::zeros(3)).unwrap_err();
        assert_eq!(err, crate::Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn complement_examples() {
        let c = line(1.0, 0.0).complement();
        assert_eq!(c.dim(), 1);
        assert!(c.same_span(&line(0.0, 1.0), 1e-12));
        assert!(Subspace::full(4).complement().is_trivial());
        assert_eq!(Subspace::trivial(3).complement().dim(), 3);
    }

    #[test]
    fn intersection_examples() {
        let t = intersect_many(&[line(1.0, 0.0), line(0.0, 1.0)], RANK_TOL).unwrap();
        assert!(t.is_trivial());

        let s = line(2.0, 1.0);
        let same = intersect_many(&[s.clone(), s.clone()], RANK_TOL).unwrap();
        assert!(same.same_span(&s, 1e-12));

        // xy-plane ∩ xz-plane: z = 0 and y = 0 leaves the x axis.
        let xy = orthonormalize(&cols(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), RANK_TOL).unwrap();
        let xz = orthonormalize(&cols(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]), RANK_TOL).unwrap();
        let x_axis = Subspace::from_orthonormal(cols(3, &[1.0, 0.0, 0.0])).unwrap();
        let got = intersect_many(&[xy, xz], RANK_TOL).unwrap();
        assert!(got.same_span(&x_axis, 1e-12));

        assert!(intersect_many(&[], RANK_TOL).is_err());
    }

    #[test]
    fn principal_angle_examples() {
        let a = principal_angles(&line(1.0, 0.0), &line(1.0, 0.0)).unwrap();
        assert!(a[0].abs() < 1e-7);
        let a = principal_angles(&line(1.0, 0.0), &line(0.0, 1.0)).unwrap();
        assert!((a[0] - FRAC_PI_2).abs() < 1e-15);
        let phi = FRAC_PI_3;
        let a = principal_angles(&line(1.0, 0.0), &line(phi.cos(), phi.sin())).unwrap();
        // oracle: the 1x1 cross-Gram is |cos phi|
        assert!((a[0] - phi.cos().abs().acos()).abs() < 1e-14);
        assert!(principal_angles(&Subspace::trivial(2), &line(1.0, 0.0)).is_err());
    }

    #[test]
    fn random_subspace_contract() {
        let a = random_subspace(5, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_subspace(5, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let gram = a.basis().tr_mul(a.basis());
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);

        let big = random_subspace(50, 25, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(big.dim(), 25);

        let rng = &mut ChaCha8Rng::seed_from_u64(0);
        assert!(random_subspace(5, 0, rng).is_err());
        assert!(random_subspace(5, 5, rng).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(Problem::new(vec![line(1.0, 0.0)]).is_err());
        assert!(Problem::new(vec![line(1.0, 0.0), Subspace::full(3)]).is_err());
        assert_eq!(Problem::new(vec![line(1.0, 0.0), line(0.0, 1.0)]).unwrap().len(), 2);
    }
}
