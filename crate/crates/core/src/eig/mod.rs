//! Hermitian eigensolvers, spectrum slicing, Chebyshev spectral filters and
//! certified extraction of discrete eigenvalues in spectral gaps.

mod filter;
mod slicing;

pub use filter::{spectral_filter, ChebyshevFilter, FilteredOperator, DEFAULT_FILTER_EPS};
pub use slicing::{
    eigs_in_interval, gap_eigenvalues, inertia_count, EigOptions, InertiaProbe, Slicer, ValidatedEigenpair, BOUNDARY_GATE,
    STABILITY_GATE,
};

use crate::linalg::{faer_eigh, CMat};
use crate::{Error, Result, C64};

pub const MAX_DENSE_DIM: usize = 4096;

/// Ascending eigenvalues and orthonormal eigenvectors of a dense Hermitian matrix.
pub fn hermitian_eig_dense(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n > MAX_DENSE_DIM {
        return Err(Error::precondition(format!("dense eigensolve of dimension {n} exceeds {MAX_DENSE_DIM}")));
    }
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let f = faer::Mat::<C64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let (vals, vecs) = faer_eigh(&f)?;
    Ok((vals, CMat::from_fn(n, n, |i, j| vecs[(i, j)])))
}
