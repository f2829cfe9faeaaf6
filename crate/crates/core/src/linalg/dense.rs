//! Dense helpers on top of LAPACK: generalized Hermitian eigenproblems,
//! null spaces and numerical rank.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{c64, EighInto, SVD, UPLO};

use crate::error::Result;
use crate::scalar::Field;

/// Relative singular-value threshold used for ranks and null spaces.
pub const RANK_TOL: f64 = 1e-10;

/// All eigenpairs of `A x = λ M x` with `M` positive definite. Eigenvectors
/// are returned as `M`-orthonormal columns.
pub fn eigh_generalized<S: Field>(a: Array2<S>, m: Array2<S>) -> Result<(Vec<f64>, Array2<S>)> {
    let (vals, (vecs, _)) = (a, m).eigh_into(UPLO::Lower)?;
    Ok((vals.to_vec(), vecs))
}

/// Standard Hermitian eigenproblem.
pub fn eigh<S: Field>(a: Array2<S>) -> Result<(Vec<f64>, Array2<S>)> {
    let (vals, vecs) = a.eigh_into(UPLO::Lower)?;
    Ok((vals.to_vec(), vecs))
}

pub fn singular_values<S: Field>(a: &Array2<S>) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let (_, sv, _) = a.svd(false, false)?;
    Ok(sv.to_vec())
}

/// Number of singular values above `tol * σ_max` (and above an absolute floor).
pub fn numerical_rank<S: Field>(a: &Array2<S>, tol: f64) -> Result<usize> {
    let sv = singular_values(a)?;
    Ok(count_above(&sv, tol))
}

fn count_above(sv: &[f64], tol: f64) -> usize {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    count_above_scaled(sv, tol, smax)
}

/// Singular values above `tol * scale`; `scale` is the magnitude the
/// matrix is to be compared with, which may exceed its own `σ_max`.
fn count_above_scaled(sv: &[f64], tol: f64, scale: f64) -> usize {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax <= 1e-300 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * scale.max(smax)).count()
}

/// Orthonormal basis of `ker a` as columns.
pub fn null_space<S: Field>(a: &Array2<S>, tol: f64) -> Result<Array2<S>> {
    null_space_scaled(a, tol, 0.0)
}

/// Null space treating singular values below `tol * max(σ_max, scale)` as zero.
pub fn null_space_scaled<S: Field>(a: &Array2<S>, tol: f64, scale: f64) -> Result<Array2<S>> {
    let n = a.ncols();
    if a.nrows() == 0 || a.iter().all(|v| v.abs() == 0.0) {
        return Ok(Array2::eye(n));
    }
    let (_, sv, vt) = a.svd(false, true)?;
    let vt = vt.expect("right singular vectors requested");
    let rank = count_above_scaled(sv.as_slice().unwrap(), tol, scale);
    // rows of vt past the rank span the kernel; conjugate to get columns
    Ok(vt.slice(s![rank.., ..]).t().mapv(|v| v.conj()))
}

/// Orthonormal basis of `ran a` as columns.
pub fn range_space<S: Field>(a: &Array2<S>, tol: f64) -> Result<Array2<S>> {
    range_space_scaled(a, tol, 0.0)
}

/// Range keeping singular values above `tol * max(σ_max, scale)`.
pub fn range_space_scaled<S: Field>(a: &Array2<S>, tol: f64, scale: f64) -> Result<Array2<S>> {
    let m = a.nrows();
    if a.ncols() == 0 || a.iter().all(|v| v.abs() == 0.0) {
        return Ok(Array2::zeros((m, 0)));
    }
    let (u, sv, _) = a.svd(true, false)?;
    let u = u.expect("left singular vectors requested");
    let rank = count_above_scaled(sv.as_slice().unwrap(), tol, scale);
    Ok(u.slice(s![.., ..rank]).to_owned())
}

/// `V Vᴴ` for a matrix with orthonormal columns.
pub fn projector_from_basis<S: Field>(v: &Array2<S>) -> Array2<S> {
    v.dot(&adjoint(v))
}

pub fn adjoint<S: Field>(a: &Array2<S>) -> Array2<S> {
    a.t().mapv(|v| v.conj())
}

/// Spectral norm.
pub fn op_norm<S: Field>(a: &Array2<S>) -> Result<f64> {
    Ok(singular_values(a)?.into_iter().fold(0.0, f64::max))
}

/// Largest entry modulus.
pub fn max_abs<S: Field>(a: &Array2<S>) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Moore–Penrose pseudo-inverse through the SVD.
pub fn pinv(a: &Array2<c64>, tol: f64) -> Result<Array2<c64>> {
    pinv_scaled(a, tol, 0.0)
}

pub fn pinv_scaled(a: &Array2<c64>, tol: f64, scale: f64) -> Result<Array2<c64>> {
    let (m, n) = a.dim();
    if a.iter().all(|v| v.norm() == 0.0) {
        return Ok(Array2::zeros((n, m)));
    }
    let (u, sv, vt) = a.svd(true, true)?;
    let (u, vt) = (u.unwrap(), vt.unwrap());
    let rank = count_above_scaled(sv.as_slice().unwrap(), tol, scale);
    let mut out = Array2::<c64>::zeros((n, m));
    for k in 0..rank {
        let inv = 1.0 / sv[k];
        let vk = vt.row(k).mapv(|v| v.conj());
        let uk = u.column(k).mapv(|v| v.conj());
        for i in 0..n {
            for j in 0..m {
                out[[i, j]] += vk[i] * uk[j] * inv;
            }
        }
    }
    Ok(out)
}

/// Stack matrices vertically.
pub fn vstack<S: Field>(blocks: &[Array2<S>]) -> Array2<S> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(0), &views).expect("column counts agree")
}

/// Narrow a complex matrix to a field, `None` if it carries an imaginary part.
pub fn narrow<S: Field>(a: &Array2<c64>, tol: f64) -> Option<Array2<S>> {
    let mut out = Array2::zeros(a.dim());
    for (o, z) in out.iter_mut().zip(a.iter()) {
        *o = S::from_c64(*z, tol)?;
    }
    Some(out)
}

pub fn widen<S: Field>(a: &Array2<S>) -> Array2<c64> {
    a.mapv(|v| v.to_c64())
}

pub fn column_norms<S: Field>(a: &Array2<S>) -> Array1<f64> {
    a.axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v.square()).sum::<f64>().sqrt())
        .collect()
}
