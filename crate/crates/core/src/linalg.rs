//! Thin wrappers around the dense faer kernels used by the eigensolvers and
//! the pencil reduction.

use faer::prelude::Solve;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{CoreError, Result};

type C = Complex64;

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(mat: faer::MatRef<'_, C>) -> Result<(Vec<f64>, Mat<C>)> {
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| CoreError::DenseFactorization(format!("hermitian eigen: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn general_eigen(mat: faer::MatRef<'_, C>) -> Result<(Vec<C>, Mat<C>)> {
    let evd = mat
        .eigen()
        .map_err(|e| CoreError::DenseFactorization(format!("general eigen: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals: Vec<C> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// (sigma_min, sigma_max) of a dense matrix.
pub fn singular_extents(mat: faer::MatRef<'_, C>) -> Result<(f64, f64)> {
    let svd = mat
        .svd()
        .map_err(|e| CoreError::DenseFactorization(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let n = s.nrows();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((s[n - 1].re, s[0].re))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(mat: faer::MatRef<'_, C>) -> Result<f64> {
    Ok(singular_extents(mat)?.1)
}

/// Solve A X = B by partial-pivoting LU.
pub fn lu_solve(a: faer::MatRef<'_, C>, b: faer::MatRef<'_, C>) -> Mat<C> {
    a.partial_piv_lu().solve(b)
}

/// max_ij |A_ij - conj(A_ji)| of a dense matrix.
pub fn dense_hermiticity_defect(mat: faer::MatRef<'_, C>) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            defect = defect.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    defect
}

/// Hermitian part (A + A^H) / 2.
pub fn hermitian_part(mat: faer::MatRef<'_, C>) -> Mat<C> {
    Mat::from_fn(mat.nrows(), mat.ncols(), |i, j| {
        (mat[(i, j)] + mat[(j, i)].conj()) * 0.5
    })
}

/// Columns of a matrix as owned vectors.
pub fn columns(mat: faer::MatRef<'_, C>) -> Vec<Vec<C>> {
    (0..mat.ncols())
        .map(|j| (0..mat.nrows()).map(|i| mat[(i, j)]).collect())
        .collect()
}

pub fn from_columns(n: usize, cols: &[Vec<C>]) -> Mat<C> {
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}
