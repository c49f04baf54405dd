//! Tolerance-aware dense linear algebra.
//!
//! Everything here is SVD based: numerical rank uses a cutoff relative to the
//! largest singular value, and kernels, right inverses and minimum-norm solves
//! all share that cutoff so the routines agree with each other on what counts
//! as "zero".

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Numerical tolerances shared by every check in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Singular values at or below `rank_rtol * sigma_max` count as zero.
    pub rank_rtol: f64,
    /// Absolute bound on equation residuals (entrywise max norm).
    pub residual_atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_rtol: 1e-10,
            residual_atol: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(rank_rtol: f64, residual_atol: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rank_rtol) {
            return Err(Error::InvalidInput(format!(
                "rank_rtol must lie in [0, 1), got {rank_rtol}"
            )));
        }
        if !(residual_atol > 0.0 && residual_atol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "residual_atol must be positive and finite, got {residual_atol}"
            )));
        }
        Ok(Tolerance {
            rank_rtol,
            residual_atol,
        })
    }
}

/// Entrywise max norm; zero for empty matrices.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `[a b]`. Row counts must agree.
pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack: row counts differ");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// `[a; b]`. Column counts must agree.
pub fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.ncols(), "vstack: column counts differ");
    let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub fn vstack_vec(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Thin SVD with singular values sorted in decreasing order.
struct Svd {
    u: Matrix,
    sigma: Vec<f64>,
    v_t: Matrix,
}

fn svd_sorted(m: &Matrix) -> Svd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = Matrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    Svd { u, sigma, v_t }
}

fn rank_from_sigma(sigma: &[f64], tol: &Tolerance) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_rtol * smax;
    sigma.iter().filter(|&&s| s > cutoff).count()
}

fn is_empty(m: &Matrix) -> bool {
    m.nrows() == 0 || m.ncols() == 0
}

/// Number of singular values above `rank_rtol * sigma_max`.
pub fn rank_of(m: &Matrix, tol: &Tolerance) -> usize {
    if is_empty(m) {
        return 0;
    }
    let sigma = m.singular_values();
    let mut sigma: Vec<f64> = sigma.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    rank_from_sigma(&sigma, tol)
}

/// Orthonormal basis of `ker m`, one column per null direction.
///
/// Columns are right singular vectors belonging to the (numerically) zero
/// singular values, in order of decreasing singular value, each flipped so
/// that its first non-negligible entry is positive.
pub fn kernel_onb(m: &Matrix, tol: &Tolerance) -> Matrix {
    let cols = m.ncols();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return Matrix::identity(cols, cols);
    }
    // Pad wide matrices with zero rows so the SVD returns a full V.
    let padded = if m.nrows() < cols {
        vstack(m, &Matrix::zeros(cols - m.nrows(), cols))
    } else {
        m.clone()
    };
    let svd = svd_sorted(&padded);
    let rank = rank_from_sigma(&svd.sigma, tol);
    let mut basis = svd.v_t.rows(rank, cols - rank).transpose();
    for mut col in basis.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-8) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    basis
}

/// Moore-Penrose pseudoinverse with the rank cutoff of `tol`, plus that rank.
pub fn pseudo_inverse(m: &Matrix, tol: &Tolerance) -> (Matrix, usize) {
    if is_empty(m) {
        return (Matrix::zeros(m.ncols(), m.nrows()), 0);
    }
    let svd = svd_sorted(m);
    let rank = rank_from_sigma(&svd.sigma, tol);
    let mut pinv = Matrix::zeros(m.ncols(), m.nrows());
    for i in 0..rank {
        let v = svd.v_t.row(i).transpose();
        let u = svd.u.column(i);
        pinv += (v * u.transpose()) / svd.sigma[i];
    }
    (pinv, rank)
}

/// Right inverse `M+` with `m * M+ = I`; the pseudoinverse is used.
pub fn right_inverse(m: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let (pinv, rank) = pseudo_inverse(m, tol);
    if rank < m.nrows() {
        return Err(Error::RankDeficient {
            rows: m.nrows(),
            rank,
        });
    }
    Ok(pinv)
}

/// Minimum-norm least-squares solution of `a * X = b`, with a flag telling
/// whether the system is consistent within `residual_atol`.
pub fn min_norm_solve(a: &Matrix, b: &Matrix, tol: &Tolerance) -> (Matrix, bool) {
    assert_eq!(a.nrows(), b.nrows(), "min_norm_solve: row counts differ");
    let (pinv, _) = pseudo_inverse(a, tol);
    let x = pinv * b;
    let feasible = max_abs(&(a * &x - b)) <= tol.residual_atol;
    (x, feasible)
}

/// Whether `im inner` is contained in `im outer`.
///
/// Decided by `rank [outer inner] == rank outer`. An `inner` whose entries are
/// all within `residual_atol` of zero is treated as the zero subspace.
pub fn image_contained(inner: &Matrix, outer: &Matrix, tol: &Tolerance) -> bool {
    assert_eq!(
        inner.nrows(),
        outer.nrows(),
        "image_contained: row counts differ"
    );
    if max_abs(inner) <= tol.residual_atol {
        return true;
    }
    rank_of(&hstack(outer, inner), tol) == rank_of(outer, tol)
}

/// Orthonormal basis of `im m`.
pub fn range_onb(m: &Matrix, tol: &Tolerance) -> Matrix {
    if is_empty(m) {
        return Matrix::zeros(m.nrows(), 0);
    }
    let svd = svd_sorted(m);
    let rank = rank_from_sigma(&svd.sigma, tol);
    svd.u.columns(0, rank).into_owned()
}
