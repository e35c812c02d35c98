//! Finite lattice sections of Laurent and Toeplitz operators, perturbations
//! and lattice norms.

mod matrix;
mod perturbation;
pub mod windows;

pub use matrix::{
    assemble_hankel_corner, assemble_laurent, assemble_toeplitz, BandedBlockMatrix, CompiledBand, LinearOperator,
    Patch,
};
pub use perturbation::{assemble_perturbation, PerturbationKind, PerturbationSpec, Support, VectorProfile};
pub use windows::{smoothstep, theta, theta_tilde, PlateauWindow, WindowFunctions};

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Sites `-L ..= L-1`.
    TwoSided,
    /// Sites `0 ..= L-1`.
    OneSided,
}

/// Index window of a finite section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct LatticeWindow {
    pub kind: WindowKind,
    pub half_length: usize,
    pub block_size: usize,
}

impl LatticeWindow {
    pub fn two_sided(half_length: usize, block_size: usize) -> Self {
        LatticeWindow {
            kind: WindowKind::TwoSided,
            half_length,
            block_size,
        }
    }

    pub fn one_sided(half_length: usize, block_size: usize) -> Self {
        LatticeWindow {
            kind: WindowKind::OneSided,
            half_length,
            block_size,
        }
    }

    pub fn new(kind: WindowKind, half_length: usize, block_size: usize) -> Self {
        LatticeWindow {
            kind,
            half_length,
            block_size,
        }
    }

    pub fn sites(&self) -> usize {
        match self.kind {
            WindowKind::TwoSided => 2 * self.half_length,
            WindowKind::OneSided => self.half_length,
        }
    }

    pub fn dim(&self) -> usize {
        self.sites() * self.block_size
    }

    /// Lattice position of the first site.
    pub fn first(&self) -> i64 {
        match self.kind {
            WindowKind::TwoSided => -(self.half_length as i64),
            WindowKind::OneSided => 0,
        }
    }

    pub fn position(&self, site: usize) -> i64 {
        self.first() + site as i64
    }

    pub fn site(&self, position: i64) -> Option<usize> {
        let s = position - self.first();
        (s >= 0 && (s as usize) < self.sites()).then_some(s as usize)
    }

    /// Same kind and block size, different half-length.
    pub fn resized(&self, half_length: usize) -> Self {
        LatticeWindow { half_length, ..*self }
    }

    /// Whether `site` lies in the outer `fraction` of the window: both ends
    /// for two-sided windows, the far end for one-sided windows.
    pub fn is_outer(&self, site: usize, fraction: f64) -> bool {
        let n = self.sites() as f64;
        let s = site as f64 + 0.5;
        match self.kind {
            WindowKind::TwoSided => s < fraction * 0.5 * n || s > n - fraction * 0.5 * n,
            WindowKind::OneSided => s > n - fraction * n,
        }
    }

    /// Norm of `x` on the outer `fraction` of the window.
    pub fn outer_mass(&self, x: &[C64], fraction: f64) -> f64 {
        let nb = self.block_size;
        let mut s = 0.0;
        for site in 0..self.sites() {
            if self.is_outer(site, fraction) {
                s += x[site * nb..(site + 1) * nb].iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
        }
        s.sqrt()
    }

    /// Unit vector at lattice position `n`, component `c`.
    pub fn unit(&self, n: i64, c: usize) -> Option<Vec<C64>> {
        let s = self.site(n)?;
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[s * self.block_size + c] = C64::new(1.0, 0.0);
        Some(v)
    }
}

/// `<N>^{-s} x`, i.e. `(1 + n^2)^{-s/2} x_n` blockwise.
pub fn weight_vector(x: &[C64], window: &LatticeWindow, s: f64) -> Vec<C64> {
    let nb = window.block_size;
    x.chunks(nb)
        .enumerate()
        .flat_map(|(site, blk)| {
            let n = window.position(site) as f64;
            let w = (1.0 + n * n).powf(-0.5 * s);
            blk.iter().map(move |v| v * w)
        })
        .collect()
}

/// `||theta_tilde(|N|/2) x|| + sum_j 2^{j/2} ||theta(2^{-j}|N|) x||`.
///
/// The low-frequency term keeps this a norm rather than a seminorm.
pub fn besov_norm(x: &[C64], window: &LatticeWindow) -> f64 {
    let nb = window.block_size;
    let sq: Vec<(f64, f64)> = x
        .chunks(nb)
        .enumerate()
        .map(|(site, blk)| {
            (
                window.position(site).unsigned_abs() as f64,
                blk.iter().map(|v| v.norm_sqr()).sum::<f64>(),
            )
        })
        .collect();
    let max_n = sq.iter().map(|(n, _)| *n).fold(0.0, f64::max);
    let low: f64 = sq.iter().map(|(n, m)| theta_tilde(n / 2.0).powi(2) * m).sum::<f64>().sqrt();
    let mut total = low;
    let mut j = 0;
    loop {
        let r = 2f64.powi(j);
        if r >= max_n.max(1.0) {
            break;
        }
        let part: f64 = sq.iter().map(|(n, m)| theta(n / r).powi(2) * m).sum::<f64>().sqrt();
        total += r.sqrt() * part;
        j += 1;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights() {
        let w = LatticeWindow::two_sided(4, 1);
        let x = vec![C64::new(1.0, 0.0); 8];
        let y = weight_vector(&x, &w, 1.0);
        assert_eq!(y[4], C64::new(1.0, 0.0)); // position 0
        assert!((y[5].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(weight_vector(&x, &w, 0.0), x);
    }

    #[test]
    fn besov_of_unit_vectors() {
        let w = LatticeWindow::two_sided(16, 1);
        let e0 = w.unit(0, 0).unwrap();
        assert!((besov_norm(&e0, &w) - 1.0).abs() < 1e-15);
        let e3 = w.unit(3, 0).unwrap();
        let mut want = theta_tilde(1.5);
        for j in 0..10 {
            want += 2f64.powf(j as f64 / 2.0) * theta(3.0 / 2f64.powi(j));
        }
        assert!((besov_norm(&e3, &w) - want).abs() < 1e-14);
    }

    #[test]
    fn outer_region() {
        let w = LatticeWindow::two_sided(10, 1);
        assert!(w.is_outer(0, 0.1) && w.is_outer(19, 0.1) && !w.is_outer(1, 0.1) && !w.is_outer(10, 0.1));
        let o = LatticeWindow::one_sided(10, 1);
        assert!(o.is_outer(9, 0.1) && !o.is_outer(0, 0.1) && !o.is_outer(8, 0.1));
    }
}
