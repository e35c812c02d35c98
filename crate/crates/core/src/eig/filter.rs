use crate::lattice::{BandedBlockMatrix, CompiledBand, LinearOperator};
use crate::{Error, Result, C64};
use rustfft::FftPlanner;
use std::f64::consts::PI;

pub const DEFAULT_FILTER_EPS: f64 = 1e-6;
const MAX_DEGREE: usize = 20000;

/// Chebyshev expansion of a scalar function on an enclosing interval.
#[derive(Debug, Clone)]
pub struct ChebyshevFilter {
    pub center: f64,
    pub half_width: f64,
    /// `f(x) ~ c_0 / 2 + sum_k c_k T_k((x - center) / half_width)`.
    pub coeffs: Vec<f64>,
    /// `sum_{k > degree} |c_k|`: a uniform bound on the truncation error.
    pub tail: f64,
}

impl ChebyshevFilter {
    /// Expand `f` on `[lo, hi]`. With `degree = None`, the smallest degree
    /// meeting `eps` is used; otherwise a tail above `eps` is an error.
    pub fn new<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, degree: Option<usize>, eps: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::precondition("filter hull must have positive length"));
        }
        let center = 0.5 * (hi + lo);
        let half_width = 0.5 * (hi - lo);
        let want = degree.unwrap_or(0);
        let mut m = (8 * (want + 1)).max(8192).next_power_of_two();
        loop {
            let all = chebyshev_coefficients(&f, center, half_width, m);
            // suffix sums of |c_k| above the DCT roundoff floor
            let peak = all.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            let floor = 32.0 * f64::EPSILON * peak;
            let mut suffix = vec![0.0; m + 1];
            for k in (0..m).rev() {
                suffix[k] = suffix[k + 1] + (all[k].abs() - floor).max(0.0);
            }
            let required = (0..m).find(|&d| suffix[d + 1] <= eps);
            let d = match (degree, required) {
                (Some(d), Some(r)) if r <= d => d,
                (Some(d), r) => {
                    return Err(Error::FilterDegree {
                        requested: d,
                        required: r,
                        eps,
                        tail: suffix[(d + 1).min(m)],
                    })
                }
                (None, Some(r)) => r,
                (None, None) if m < 8 * MAX_DEGREE => {
                    m *= 2;
                    continue;
                }
                (None, None) => {
                    return Err(Error::FilterDegree {
                        requested: MAX_DEGREE,
                        required: None,
                        eps,
                        tail: suffix[MAX_DEGREE.min(m)],
                    })
                }
            };
            if 4 * (d + 1) > m {
                m *= 2;
                continue;
            }
            return Ok(ChebyshevFilter {
                center,
                half_width,
                coeffs: all[..=d].to_vec(),
                tail: suffix[d + 1],
            });
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_width;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * self.coeffs[0]
    }

    /// `p(A) x` by the three-term recurrence.
    pub fn apply<A: LinearOperator + ?Sized>(&self, a: &A, x: &[C64]) -> Vec<C64> {
        let n = x.len();
        let inv = 1.0 / self.half_width;
        let shift = self.center;
        let mut y: Vec<C64> = x.iter().map(|v| v * (0.5 * self.coeffs[0])).collect();
        if self.coeffs.len() == 1 {
            return y;
        }
        let mut prev = x.to_vec();
        let mut cur = vec![C64::new(0.0, 0.0); n];
        a.apply_into(&prev, &mut cur);
        for i in 0..n {
            cur[i] = (cur[i] - prev[i] * shift) * inv;
            y[i] += cur[i] * self.coeffs[1];
        }
        let mut next = vec![C64::new(0.0, 0.0); n];
        for &c in &self.coeffs[2..] {
            a.apply_into(&cur, &mut next);
            for i in 0..n {
                next[i] = (next[i] - cur[i] * shift) * (2.0 * inv) - prev[i];
                y[i] += next[i] * c;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        y
    }
}

impl ChebyshevFilter {
    /// `p(A) x` touching only the sites the recurrence can reach from the
    /// support of `x`; much cheaper than [`apply`](Self::apply) for
    /// localized `x`.
    pub fn apply_local(&self, a: &CompiledBand, x: &[C64]) -> Vec<C64> {
        let n = x.len();
        let zero = C64::new(0.0, 0.0);
        let (Some(mut lo), Some(mut hi)) = (x.iter().position(|v| *v != zero), x.iter().rposition(|v| *v != zero))
        else {
            return vec![zero; n];
        };
        let inv = 1.0 / self.half_width;
        let shift = self.center;
        let mut y: Vec<C64> = x.iter().map(|v| v * (0.5 * self.coeffs[0])).collect();
        if self.coeffs.len() == 1 {
            return y;
        }
        let mut prev = x.to_vec();
        let mut cur = vec![zero; n];
        (lo, hi) = a.spread(lo, hi);
        a.apply_rows_into(&prev, &mut cur, lo, hi);
        for i in lo..=hi {
            cur[i] = (cur[i] - prev[i] * shift) * inv;
            y[i] += cur[i] * self.coeffs[1];
        }
        let mut next = vec![zero; n];
        for &c in &self.coeffs[2..] {
            (lo, hi) = a.spread(lo, hi);
            a.apply_rows_into(&cur, &mut next, lo, hi);
            for i in lo..=hi {
                next[i] = (next[i] - cur[i] * shift) * (2.0 * inv) - prev[i];
                y[i] += next[i] * c;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        y
    }
}

/// First `m` Chebyshev coefficients of `f` on `center +- half_width`,
/// by a DCT of samples at the Chebyshev points.
fn chebyshev_coefficients<F: Fn(f64) -> f64>(f: &F, center: f64, half_width: f64, m: usize) -> Vec<f64> {
    let mut buf = vec![C64::new(0.0, 0.0); 2 * m];
    for j in 0..m {
        let theta = PI * (j as f64 + 0.5) / m as f64;
        let v = f(center + half_width * theta.cos());
        buf[j] = C64::new(v, 0.0);
        buf[2 * m - 1 - j] = C64::new(v, 0.0);
    }
    FftPlanner::new().plan_fft_forward(2 * m).process(&mut buf);
    (0..m)
        .map(|k| {
            let ph = C64::from_polar(1.0, -PI * k as f64 / (2.0 * m as f64));
            (ph * buf[k]).re / m as f64
        })
        .collect()
}

/// `phi(B)` as an applicable operator.
#[derive(Debug, Clone)]
pub struct FilteredOperator<'a> {
    pub matrix: &'a BandedBlockMatrix,
    pub filter: ChebyshevFilter,
    compiled: CompiledBand,
}

impl LinearOperator for FilteredOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&self.filter.apply(&self.compiled, x));
    }
}

/// Chebyshev filter `phi(B)` on the Gershgorin hull of `B`.
///
/// With `degree = None` the smallest degree meeting `eps` is chosen.
pub fn spectral_filter<'a, F: Fn(f64) -> f64>(
    b: &'a BandedBlockMatrix,
    phi: F,
    degree: Option<usize>,
    eps: f64,
) -> Result<FilteredOperator<'a>> {
    let (lo, hi) = b.gershgorin();
    let pad = 1e-3 * (hi - lo).max(1e-12);
    let filter = ChebyshevFilter::new(phi, lo - pad, hi + pad, degree, eps)?;
    Ok(FilteredOperator {
        matrix: b,
        filter,
        compiled: b.compile(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_of_smooth_function() {
        let f = ChebyshevFilter::new(|x: f64| (2.0 * x).cos(), -1.0, 1.0, None, 1e-13).unwrap();
        for i in 0..21 {
            let x = -1.0 + 0.1 * i as f64;
            assert!((f.eval(x) - (2.0 * x).cos()).abs() < 1e-12);
        }
        assert!(f.degree() < 30, "degree {} tail {}", f.degree(), f.tail);
    }

    #[test]
    fn too_small_degree_reports_required() {
        let w = crate::lattice::PlateauWindow::around(-0.3, 0.3, 0.05);
        let r = ChebyshevFilter::new(|x| w.eval(x), -1.0, 1.0, Some(20), 1e-6);
        match r {
            Err(Error::FilterDegree { required, .. }) => assert!(required.unwrap() > 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn local_application_matches_full() {
        use crate::lattice::{LatticeWindow, PerturbationKind, PerturbationSpec, VectorProfile};
        use crate::symbol::catalog;
        let model = crate::LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0)).with_perturbation(
            PerturbationSpec::new(
                PerturbationKind::RankOne {
                    strength: 0.7,
                    profile: VectorProfile::Exponential { amplitude: 1.0, rate: 0.5 },
                    direction: None,
                },
                false,
                2,
            )
            .unwrap(),
        );
        let h = model.assemble(200).unwrap();
        assert!(h.patch().is_some());
        let hc = h.compile();
        let f = ChebyshevFilter::new(|x: f64| (-x * x).exp(), -4.0, 4.0, Some(120), f64::INFINITY).unwrap();
        let w: LatticeWindow = *h.window();
        for (n, c) in [(-150, 0), (-60, 1), (0, 0), (90, 1)] {
            let e = w.unit(n, c).unwrap();
            let a = f.apply(&hc, &e);
            let b = f.apply_local(&hc, &e);
            let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(d < 1e-13, "{n} {c} {d}");
        }
    }
}
