//! Dense and banded kernels shared by the analysis modules.

mod band;
mod bunch_kaufman;
mod dense;
pub mod fourier;
mod jacobi;

pub use band::{BandLu, HermitianBand};
pub use bunch_kaufman::{BkFactor, Breakdown};
pub use dense::{faer_eigh, faer_eigvalsh, gram, mat_adjoint_mul};
pub use jacobi::jacobi_eigh;

use crate::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small dense complex matrix.
pub type CMat = DMatrix<C64>;

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(v: &mut [C64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

/// Normalize in place, returning the previous norm.
pub fn normalize(v: &mut [C64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        scale(v, 1.0 / n);
    }
    n
}

/// Spectral norm of a small dense matrix.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = m.adjoint() * m;
    match jacobi_eigh(&g, 1e-15) {
        Ok((vals, _)) => vals.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => m.norm(),
    }
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Deterministic complex Gaussian-like start vectors.
pub struct StartVectors {
    rng: ChaCha8Rng,
}

impl StartVectors {
    pub fn new(seed: u64) -> Self {
        StartVectors {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn vector(&mut self, n: usize) -> Vec<C64> {
        let mut v: Vec<C64> = (0..n)
            .map(|_| C64::new(self.rng.random::<f64>() - 0.5, self.rng.random::<f64>() - 0.5))
            .collect();
        normalize(&mut v);
        v
    }
}

/// Modified Gram-Schmidt (applied twice) on column vectors; drops
/// columns whose norm collapses below `drop_tol`.
pub fn orthonormalize(cols: &mut Vec<Vec<C64>>, drop_tol: f64) {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(cols.len());
    for mut v in cols.drain(..) {
        let n0 = norm(&v);
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let n1 = norm(&v);
        if n1 > drop_tol * n0.max(f64::MIN_POSITIVE) && n1 > 0.0 {
            scale(&mut v, 1.0 / n1);
            out.push(v);
        }
    }
    *cols = out;
}
