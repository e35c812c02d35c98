//! Matrix symbols `h(p) = sum_j coeff(j) e^{ijp}` and their band structure.

pub mod catalog;
pub(crate) mod bands;
mod critical;

pub use bands::{compute_bands, essential_spectrum, BandStructure, Branch, DEFAULT_GRID};
pub use critical::{compute_critical_set, CriticalKind, CriticalPoint, CriticalSet};

use crate::linalg::{hermitian_defect, CMat};
use crate::{Error, Result, C64};

/// Hermitian matrix symbol with finitely many Fourier coefficients.
///
/// Only `coeff(0..=M)` is stored; `coeff(-j)` is the adjoint of `coeff(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSymbol {
    n: usize,
    coeffs: Vec<CMat>,
}

impl MatrixSymbol {
    /// Build from `coeff(0), .., coeff(M)`. `coeff(0)` must be Hermitian.
    pub fn new(coeffs: Vec<CMat>) -> Result<Self> {
        let n = coeffs
            .first()
            .map(|c| c.nrows())
            .ok_or_else(|| Error::InvalidSymbol("no coefficients".into()))?;
        if n == 0 {
            return Err(Error::InvalidSymbol("block size must be positive".into()));
        }
        for (j, c) in coeffs.iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::InvalidSymbol(format!(
                    "coeff({j}) is {}x{}, expected {n}x{n}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidSymbol(format!("coeff({j}) has non-finite entries")));
            }
        }
        let scale = coeffs[0].norm().max(1.0);
        if hermitian_defect(&coeffs[0]) > 1e-12 * scale {
            return Err(Error::InvalidSymbol("coeff(0) is not Hermitian".into()));
        }
        let mut coeffs = coeffs;
        coeffs[0] = (&coeffs[0] + coeffs[0].adjoint()) * C64::new(0.5, 0.0);
        Ok(MatrixSymbol { n, coeffs })
    }

    /// Build from signed indices; each `-j` present alongside `j` must equal the adjoint.
    pub fn from_signed(n: usize, entries: &[(i64, CMat)]) -> Result<Self> {
        let m = entries.iter().map(|(j, _)| j.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![CMat::zeros(n, n); m + 1];
        let mut seen = vec![false; m + 1];
        for (j, c) in entries.iter().filter(|(j, _)| *j >= 0) {
            let j = *j as usize;
            if seen[j] {
                return Err(Error::InvalidSymbol(format!("coeff({j}) given twice")));
            }
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::InvalidSymbol(format!("coeff({j}) has wrong shape")));
            }
            seen[j] = true;
            coeffs[j] = c.clone();
        }
        for (j, c) in entries.iter().filter(|(j, _)| *j < 0) {
            let k = j.unsigned_abs() as usize;
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::InvalidSymbol(format!("coeff({j}) has wrong shape")));
            }
            if seen[k] {
                let defect = (c - coeffs[k].adjoint()).norm();
                if defect > 1e-12 * coeffs[k].norm().max(1.0) {
                    return Err(Error::InvalidSymbol(format!(
                        "coeff({j}) differs from adjoint of coeff({k}) by {defect:e}"
                    )));
                }
            } else {
                seen[k] = true;
                coeffs[k] = c.adjoint();
            }
        }
        Self::new(coeffs)
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `coeff(j)` for any integer `j`, zero outside `[-M, M]`.
    pub fn coeff(&self, j: i64) -> CMat {
        let k = j.unsigned_abs() as usize;
        if k >= self.coeffs.len() {
            CMat::zeros(self.n, self.n)
        } else if j >= 0 {
            self.coeffs[k].clone()
        } else {
            self.coeffs[k].adjoint()
        }
    }

    /// Nonnegative-index coefficients `coeff(0..=M)`.
    pub fn coefficients(&self) -> &[CMat] {
        &self.coeffs
    }

    /// `sum_j ||coeff(j)||_F` over `-M..=M`, a bound on `sup_p ||h(p)||`.
    pub fn scale(&self) -> f64 {
        self.coeffs[0].norm() + 2.0 * self.coeffs[1..].iter().map(|c| c.norm()).sum::<f64>()
    }

    pub fn eval(&self, p: f64) -> CMat {
        let mut h = self.coeffs[0].clone();
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let x = c * C64::from_polar(1.0, j as f64 * p);
            h += &x + x.adjoint();
        }
        h
    }

    /// `h'(p)`.
    pub fn eval_derivative(&self, p: f64) -> CMat {
        let mut h = CMat::zeros(self.n, self.n);
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let x = c * C64::new(0.0, j as f64) * C64::from_polar(1.0, j as f64 * p);
            h += &x + x.adjoint();
        }
        h
    }
}

/// `h(p) = sum_j coeff(j) e^{ijp}`.
pub fn eval_symbol(sym: &MatrixSymbol, p: f64) -> CMat {
    sym.eval(p)
}

/// Estimated exponential decay of the coefficient norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientDecay {
    /// Fitted rate in `||coeff(j)|| ~ e^{-rate |j|}`; `None` with fewer than 3 nonzero coefficients.
    pub rate: Option<f64>,
    /// Finite support, so the symbol is a trigonometric polynomial.
    pub polynomial: bool,
}

pub fn coefficient_decay(sym: &MatrixSymbol) -> CoefficientDecay {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (j, c) in sym.coeffs.iter().enumerate() {
        let n = c.norm();
        if n > 1e-300 {
            xs.push(j as f64);
            ys.push(n.ln());
        }
    }
    let rate = if xs.len() >= 3 {
        crate::special::linear_fit(&xs, &ys).map(|f| -f.slope)
    } else {
        None
    };
    CoefficientDecay {
        rate,
        polynomial: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn off_diagonal_at_zero() {
        let h = catalog::off_diagonal(2.0, 1.0).eval(0.0);
        assert!((h[(0, 1)] - C64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((h[(1, 0)] - C64::new(3.0, 0.0)).norm() < 1e-15);
        assert!(h[(0, 0)].norm() < 1e-15 && h[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn flat_pair_at_pi() {
        let h = catalog::flat_pair().eval(PI);
        assert!((h[(0, 1)] + 1.0).norm() < 1e-15);
        assert!((h[(1, 0)] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn signed_construction_checks_adjoint() {
        let a = CMat::from_row_slice(1, 1, &[C64::new(0.5, 0.1)]);
        let ok = MatrixSymbol::from_signed(1, &[(1, a.clone()), (-1, a.adjoint())]);
        assert!(ok.is_ok());
        let bad = MatrixSymbol::from_signed(1, &[(1, a.clone()), (-1, a.clone())]);
        assert!(matches!(bad, Err(Error::InvalidSymbol(_))));
    }

    #[test]
    fn decay_rate_fit() {
        let coeffs: Vec<CMat> = (0..=20)
            .map(|j| CMat::from_row_slice(1, 1, &[C64::new((-(j as f64)).exp(), 0.0)]))
            .collect();
        let d = coefficient_decay(&MatrixSymbol::new(coeffs).unwrap());
        let r = d.rate.unwrap();
        assert!((0.98..=1.02).contains(&r));
        assert!(d.polynomial);
        let d = coefficient_decay(&catalog::scalar_cos());
        assert!(d.rate.is_none() && d.polynomial);
    }
}
