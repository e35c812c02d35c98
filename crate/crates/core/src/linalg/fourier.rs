//! Grid transforms on `p_k = -pi + 2 pi k / K`.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Cached forward and inverse transforms of one length.
#[derive(Clone)]
pub struct GridFft {
    k: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GridFft({})", self.k)
    }
}

impl GridFft {
    pub fn new(k: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridFft {
            k,
            fwd: planner.plan_fft_forward(k),
            inv: planner.plan_fft_inverse(k),
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn point(&self, k: usize) -> f64 {
        grid_point(k, self.k)
    }

    /// Spectral derivative of periodic samples, Nyquist mode dropped.
    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        let k = self.k;
        let mut buf = f.to_vec();
        self.fwd.process(&mut buf);
        for (m, v) in buf.iter_mut().enumerate() {
            let freq = if m < k / 2 {
                m as f64
            } else if m == k / 2 {
                0.0
            } else {
                m as f64 - k as f64
            };
            *v *= C64::new(0.0, freq / k as f64);
        }
        self.inv.process(&mut buf);
        buf
    }

    /// `psi_hat(p_k) = sum_n psi_n e^{i n p_k}` for lattice positions `first..first+len`.
    pub fn lattice_to_grid(&self, first: i64, psi: &[C64]) -> Vec<C64> {
        let k = self.k as i64;
        let mut buf = vec![C64::new(0.0, 0.0); self.k];
        for (off, v) in psi.iter().enumerate() {
            let n = first + off as i64;
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            buf[n.rem_euclid(k) as usize] += v * sign;
        }
        self.inv.process(&mut buf);
        buf
    }

    /// Inverse of [`lattice_to_grid`](Self::lattice_to_grid) on positions `first..first+len`.
    pub fn grid_to_lattice(&self, first: i64, len: usize, f: &[C64]) -> Vec<C64> {
        let k = self.k as i64;
        let mut buf = f.to_vec();
        self.fwd.process(&mut buf);
        (0..len)
            .map(|off| {
                let n = first + off as i64;
                let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                buf[n.rem_euclid(k) as usize] * (sign / self.k as f64)
            })
            .collect()
    }
}

pub fn grid_point(k: usize, size: usize) -> f64 {
    -PI + 2.0 * PI * k as f64 / size as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trig_polynomial() {
        let g = GridFft::new(64);
        let f: Vec<C64> = (0..64).map(|k| C64::new((3.0 * g.point(k)).sin(), 0.0)).collect();
        let d = g.derivative(&f);
        for k in 0..64 {
            assert!((d[k].re - 3.0 * (3.0 * g.point(k)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_round_trip() {
        let g = GridFft::new(32);
        let psi: Vec<C64> = (0..10).map(|i| C64::new(i as f64, -(i as f64) * 0.5)).collect();
        let hat = g.lattice_to_grid(-4, &psi);
        // direct evaluation at one point
        let p = g.point(5);
        let direct: C64 = psi
            .iter()
            .enumerate()
            .map(|(i, v)| v * C64::from_polar(1.0, (i as f64 - 4.0) * p))
            .sum();
        assert!((hat[5] - direct).norm() < 1e-12);
        let back = g.grid_to_lattice(-4, 10, &hat);
        for (a, b) in back.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
