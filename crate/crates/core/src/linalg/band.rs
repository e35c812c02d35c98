use super::bunch_kaufman::{BkFactor, Breakdown};
use crate::{Error, Result, C64};

/// Scalar Hermitian band matrix: `upper[i * (w + 1) + d] = A[i][i + d]`.
#[derive(Debug, Clone)]
pub struct HermitianBand {
    n: usize,
    w: usize,
    upper: Vec<C64>,
}

impl HermitianBand {
    pub fn zeros(n: usize, w: usize) -> Self {
        HermitianBand {
            n,
            w,
            upper: vec![C64::new(0.0, 0.0); n * (w + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    /// Entry `(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i <= j {
            let d = j - i;
            if d > self.w {
                C64::new(0.0, 0.0)
            } else {
                self.upper[i * (self.w + 1) + d]
            }
        } else {
            self.get(j, i).conj()
        }
    }

    /// Add to the upper entry `(i, j)` with `i <= j`.
    pub fn add_upper(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i <= j && j - i <= self.w);
        self.upper[i * (self.w + 1) + (j - i)] += v;
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let w = self.w;
        for v in y.iter_mut() {
            *v = C64::new(0.0, 0.0);
        }
        for i in 0..self.n {
            let row = &self.upper[i * (w + 1)..(i + 1) * (w + 1)];
            let mut acc = C64::new(row[0].re, 0.0) * x[i];
            for d in 1..=w.min(self.n - 1 - i) {
                let a = row[d];
                acc += a * x[i + d];
                y[i + d] += a.conj() * x[i];
            }
            y[i] += acc;
        }
    }

    /// Number of eigenvalues strictly below `x`, by block Sylvester inertia
    /// with dense Bunch-Kaufman factorization of the Schur complements.
    pub fn count_below(&self, x: f64, tiny: f64) -> std::result::Result<usize, Breakdown> {
        let n = self.n;
        let bs = self.w.max(2);
        let mut count = 0;
        let mut carry: Option<Vec<C64>> = None;
        let mut r0 = 0;
        while r0 < n {
            let r1 = (r0 + bs).min(n);
            let m = r1 - r0;
            let mut d = vec![C64::new(0.0, 0.0); m * m];
            for i in 0..m {
                for j in 0..m {
                    d[i * m + j] = self.get(r0 + i, r0 + j);
                }
                d[i * m + i] -= x;
            }
            if let Some(s) = carry.take() {
                for (dv, sv) in d.iter_mut().zip(&s) {
                    *dv -= sv;
                }
            }
            let f = BkFactor::factor(d, m, tiny).map_err(|b| Breakdown {
                step: r0 + b.step,
                pivot: b.pivot,
            })?;
            count += f.negative_count();
            if r1 < n {
                let r2 = (r1 + bs).min(n);
                let m2 = r2 - r1;
                // X = D^{-1} C with C = A[r0..r1, r1..r2]
                let mut xcols: Vec<Vec<C64>> = Vec::with_capacity(m2);
                for j in 0..m2 {
                    let mut col: Vec<C64> = (0..m).map(|i| self.get(r0 + i, r1 + j)).collect();
                    f.solve(&mut col);
                    xcols.push(col);
                }
                let mut s = vec![C64::new(0.0, 0.0); m2 * m2];
                for a in 0..m2 {
                    for (b, xb) in xcols.iter().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for (i, xv) in xb.iter().enumerate() {
                            let c = self.get(r0 + i, r1 + a);
                            if c.re != 0.0 || c.im != 0.0 {
                                acc += c.conj() * xv;
                            }
                        }
                        s[a * m2 + b] = acc;
                    }
                }
                carry = Some(s);
            }
            r0 = r1;
        }
        Ok(count)
    }

    /// Gershgorin bounds on the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut radius = vec![0.0f64; self.n];
        for i in 0..self.n {
            for d in 1..=self.w.min(self.n - 1 - i) {
                let a = self.upper[i * (self.w + 1) + d].norm();
                radius[i] += a;
                radius[i + d] += a;
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, r) in radius.iter().enumerate() {
            let c = self.upper[i * (self.w + 1)].re;
            lo = lo.min(c - r);
            hi = hi.max(c + r);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// LU factorization with partial pivoting of `A - z I` for a Hermitian band `A`
/// and complex shift `z`, in general band storage.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    lu: Vec<C64>,
    piv: Vec<usize>,
    norm_one: f64,
}

impl BandLu {
    pub fn factor(a: &HermitianBand, z: C64) -> Result<Self> {
        let n = a.n;
        let kl = a.w;
        let ku = a.w;
        let width = 2 * kl + ku + 1;
        let mut lu = vec![C64::new(0.0, 0.0); n * width];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        let mut norm_one = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            let mut rs = 0.0;
            for j in lo..=hi {
                let mut v = a.get(i, j);
                if i == j {
                    v -= z;
                }
                rs += v.norm();
                lu[at(i, j)] = v;
            }
            norm_one = norm_one.max(rs);
        }
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu[at(k, k)].norm();
            for i in k + 1..=last_row {
                let v = lu[at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 {
                return Err(Error::NearEigenvalue {
                    shift: z.re,
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in k..=last_col {
                    lu.swap(at(k, j), at(p, j));
                }
            }
            let pivot = lu[at(k, k)];
            for i in k + 1..=last_row {
                let m = lu[at(i, k)] / pivot;
                lu[at(i, k)] = m;
                if m.re == 0.0 && m.im == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = lu[at(k, j)];
                    lu[at(i, j)] -= m * u;
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            width,
            lu,
            piv,
            norm_one,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        let width = self.width;
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.lu[at(i, k)] * bk;
            }
        }
        let span = width - kl - 1;
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + span).min(n - 1) {
                acc -= self.lu[at(k, j)] * b[j];
            }
            b[k] = acc / self.lu[at(k, k)];
        }
    }

    /// Rough condition estimate `||A|| * ||A^{-1} v|| / ||v||` from one solve
    /// with a fixed oscillating vector.
    pub fn condition_estimate(&self) -> f64 {
        let mut v: Vec<C64> = (0..self.n)
            .map(|i| C64::from_polar(1.0, 0.7 * i as f64 + 0.1 * (i * i % 17) as f64))
            .collect();
        let nv = super::norm(&v);
        self.solve(&mut v);
        self.norm_one * super::norm(&v) / nv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> HermitianBand {
        let mut a = HermitianBand::zeros(n, 1);
        for i in 0..n {
            a.add_upper(i, i, C64::new(0.1 * i as f64, 0.0));
            if i + 1 < n {
                a.add_upper(i, i + 1, C64::new(0.5, 0.2));
            }
        }
        a
    }

    #[test]
    fn lu_solves() {
        let a = tridiag(40);
        let lu = BandLu::factor(&a, C64::new(1.3, 0.01)).unwrap();
        let b: Vec<C64> = (0..40).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        let mut y = vec![C64::new(0.0, 0.0); 40];
        a.apply(&x, &mut y);
        for i in 0..40 {
            y[i] -= C64::new(1.3, 0.01) * x[i];
        }
        let err: f64 = y.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn sturm_count_matches_dense() {
        let a = tridiag(30);
        let m = crate::linalg::CMat::from_fn(30, 30, |i, j| a.get(i, j));
        let (vals, _) = crate::linalg::jacobi_eigh(&m, 1e-15).unwrap();
        for &x in &[-1.0, 0.0, 0.77, 1.5, 3.9] {
            let c = a.count_below(x, 1e-14).unwrap();
            assert_eq!(c, vals.iter().filter(|v| **v < x).count());
        }
    }
}
