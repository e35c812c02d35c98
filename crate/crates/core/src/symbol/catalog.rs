//! Worked symbols used throughout the tests and the CLI.

use super::MatrixSymbol;
use crate::linalg::CMat;
use crate::C64;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Scalar `h(p) = cos p`.
pub fn scalar_cos() -> MatrixSymbol {
    MatrixSymbol::new(vec![CMat::zeros(1, 1), CMat::from_element(1, 1, c(0.5))]).unwrap()
}

/// `h(p) = [[0, b + a e^{ip}], [b + a e^{-ip}, 0]]`: a two-site chain with
/// intra-cell hopping `b` and inter-cell hopping `a`. The super-diagonal
/// block of the lattice matrix is `[[0, 0], [a, 0]]`.
pub fn off_diagonal(a: f64, b: f64) -> MatrixSymbol {
    let a0 = CMat::from_row_slice(2, 2, &[c(0.0), c(b), c(b), c(0.0)]);
    let a1 = CMat::from_row_slice(2, 2, &[c(0.0), c(a), c(0.0), c(0.0)]);
    MatrixSymbol::new(vec![a0, a1]).unwrap()
}

/// `h(p) = [[0, e^{-ip}], [e^{ip}, 0]]`, two flat bands at `-1` and `1`.
pub fn flat_pair() -> MatrixSymbol {
    let a1 = CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)]);
    MatrixSymbol::new(vec![CMat::zeros(2, 2), a1]).unwrap()
}

/// `h(p) = diag(cos p, 0)`.
pub fn diag_cos_flat() -> MatrixSymbol {
    let a1 = CMat::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.0)]);
    MatrixSymbol::new(vec![CMat::zeros(2, 2), a1]).unwrap()
}

/// Symbol of an `N`-periodic Jacobi matrix with off-diagonal `a[0..N]`
/// (the last one closing the period) and diagonal `b[0..N]`.
pub fn periodic_jacobi(a: &[f64], b: &[f64]) -> MatrixSymbol {
    let n = b.len();
    assert!(n >= 2 && a.len() == n, "periodic_jacobi needs N >= 2 and matching lengths");
    let mut a0 = CMat::zeros(n, n);
    for i in 0..n {
        a0[(i, i)] = c(b[i]);
        if i + 1 < n {
            a0[(i, i + 1)] = c(a[i]);
            a0[(i + 1, i)] = c(a[i]);
        }
    }
    let mut a1 = CMat::zeros(n, n);
    a1[(0, n - 1)] = c(a[n - 1]);
    MatrixSymbol::new(vec![a0, a1]).unwrap()
}
