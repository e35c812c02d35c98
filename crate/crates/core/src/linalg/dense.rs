use crate::{Error, Result, C64};
use faer::{Mat, Side};

/// Eigen-decomposition of a dense Hermitian matrix: ascending eigenvalues
/// and unitary eigenvector columns.
pub fn faer_eigh(m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let e = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NonConvergence {
        what: "dense Hermitian eigensolver".into(),
        iterations: 0,
    })?;
    let s = e.S();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn faer_eigvalsh(m: &Mat<C64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let v = m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::NonConvergence {
        what: "dense Hermitian eigensolver".into(),
        iterations: 0,
    })?;
    Ok(v)
}

/// `Y^H Y`.
pub fn gram(y: &Mat<C64>) -> Mat<C64> {
    y.adjoint() * y
}

/// `A^H B`.
pub fn mat_adjoint_mul(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a.adjoint() * b
}
