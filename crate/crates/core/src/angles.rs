//! Friedrichs angles, for two subspaces and for `n` subspaces through the
//! product-space pair `(U_1 x ... x U_n, diagonal)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dense::singular_values;
use crate::error::{check_dim, Error, Result};
use crate::subspace::{intersect_many, orthonormalize, Problem, Subspace, RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleReport {
    /// Cosine of the Friedrichs angle, in `[0, 1)`.
    pub cos_f: f64,
    /// The angle in radians, `acos(cos_f)`.
    pub angle_rad: f64,
    /// Dimensions of the two subspaces once their intersection is removed.
    pub deflated_dims: (usize, usize),
}

impl AngleReport {
    fn from_cos(cos_f: f64, deflated_dims: (usize, usize)) -> Result<Self> {
        if cos_f >= 1.0 - 1e-12 {
            return Err(Error::DegenerateAngle { cos: cos_f });
        }
        Ok(Self { cos_f, angle_rad: cos_f.acos(), deflated_dims })
    }
}

/// Removes the component along `w` from every basis column of `s` and
/// re-orthonormalizes.
fn deflate(s: &Subspace, w: &Subspace) -> Result<Subspace> {
    if w.is_trivial() || s.is_trivial() {
        return Ok(s.clone());
    }
    let residual = s.basis() - w.basis() * w.basis().tr_mul(s.basis());
    // Columns of s inside w leave only rounding noise; an absolute floor keeps
    // that noise from being promoted to a direction when s ⊆ w.
    if residual.column_iter().all(|c| c.norm() <= 1e-10) {
        return Ok(Subspace::trivial(s.ambient_dim()));
    }
    orthonormalize(&residual, RANK_TOL)
}

fn friedrichs_given_intersection(s1: &Subspace, s2: &Subspace, w: &Subspace) -> Result<AngleReport> {
    let d1 = deflate(s1, w)?;
    let d2 = deflate(s2, w)?;
    let dims = (d1.dim(), d2.dim());
    if d1.is_trivial() || d2.is_trivial() {
        return AngleReport::from_cos(0.0, dims);
    }
    let cross = d1.basis().tr_mul(d2.basis());
    let top = singular_values(&cross)[0].clamp(0.0, 1.0);
    AngleReport::from_cos(top, dims)
}

/// Friedrichs angle between `s1` and `s2`: the smallest principal angle
/// after both are restricted to the orthogonal complement of `s1 ∩ s2`.
/// When either restriction is `{0}` the cosine is taken to be 0.
pub fn friedrichs(s1: &Subspace, s2: &Subspace) -> Result<AngleReport> {
    check_dim(s1.ambient_dim(), s2.ambient_dim())?;
    let w = intersect_many(&[s1.clone(), s2.clone()], RANK_TOL)?;
    friedrichs_given_intersection(s1, s2, &w)
}

/// Product set `U_1 x ... x U_n` and diagonal `{(x, ..., x)}` in `R^{pn}`.
pub fn pierra_product(problem: &Problem) -> (Subspace, Subspace) {
    let (p, n) = (problem.ambient_dim(), problem.len());
    let total: usize = problem.subspaces().iter().map(Subspace::dim).sum();
    let mut prod = DMatrix::zeros(p * n, total);
    let mut col = 0;
    for (i, u) in problem.subspaces().iter().enumerate() {
        prod.view_mut((i * p, col), (p, u.dim())).copy_from(u.basis());
        col += u.dim();
    }
    (Subspace::from_basis_unchecked(prod), diagonal_embedding(&Subspace::full(p), n))
}

/// `{(w, ..., w)/sqrt(n) : w a basis column of s}`, an orthonormal basis of
/// the diagonal copy of `s`.
fn diagonal_embedding(s: &Subspace, n: usize) -> Subspace {
    let p = s.ambient_dim();
    let scale = 1.0 / (n as f64).sqrt();
    let mut basis = DMatrix::zeros(p * n, s.dim());
    for i in 0..n {
        basis.view_mut((i * p, 0), (p, s.dim())).copy_from(&(s.basis() * scale));
    }
    Subspace::from_basis_unchecked(basis)
}

/// Friedrichs angle between the product set and the diagonal.
///
/// Their intersection is the diagonal copy of `∩U_i`, which is formed
/// directly in `R^p` instead of through `pn x pn` complements.
pub fn pierra_angle(problem: &Problem) -> Result<AngleReport> {
    let (prod, diag) = pierra_product(problem);
    let w = diagonal_embedding(&problem.intersection(), problem.len());
    friedrichs_given_intersection(&prod, &diag, &w)
}
