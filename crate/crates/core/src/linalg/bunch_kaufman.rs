use crate::C64;

/// Symmetric indefinite factorization `P A P^T = L D L^H` of a dense
/// Hermitian matrix with 1x1 and 2x2 pivots, stored in product form.
#[derive(Debug, Clone)]
pub struct BkFactor {
    n: usize,
    steps: Vec<Step>,
}

#[derive(Debug, Clone)]
enum Step {
    One {
        k: usize,
        swap: usize,
        d: f64,
        l: Vec<C64>,
    },
    Two {
        k: usize,
        swap: usize,
        d: [C64; 3],
        l0: Vec<C64>,
        l1: Vec<C64>,
    },
}

/// A pivot fell below the breakdown threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakdown {
    pub step: usize,
    pub pivot: f64,
}

const ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

impl BkFactor {
    /// Factor the Hermitian matrix held row-major in `a` (consumed).
    /// `tiny` is the absolute pivot threshold below which we report breakdown.
    pub fn factor(mut a: Vec<C64>, n: usize, tiny: f64) -> Result<Self, Breakdown> {
        assert_eq!(a.len(), n * n);
        let idx = |i: usize, j: usize| i * n + j;
        let mut steps = Vec::new();
        let mut k = 0;
        while k < n {
            let absakk = a[idx(k, k)].re.abs();
            let (mut imax, mut colmax) = (k, 0.0f64);
            for i in k + 1..n {
                let v = a[idx(i, k)].norm();
                if v > colmax {
                    colmax = v;
                    imax = i;
                }
            }
            if absakk.max(colmax) <= tiny {
                return Err(Breakdown { step: k, pivot: absakk.max(colmax) });
            }
            let (kp, kstep) = if absakk >= ALPHA * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(a[idx(imax, j)].norm());
                    }
                }
                if absakk * rowmax >= ALPHA * colmax * colmax {
                    (k, 1)
                } else if a[idx(imax, imax)].re.abs() >= ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + kstep - 1;
            if kp != kk {
                swap_sym(&mut a, n, kk, kp);
            }
            if kstep == 1 {
                let d = a[idx(k, k)].re;
                if d.abs() <= tiny {
                    return Err(Breakdown { step: k, pivot: d.abs() });
                }
                let l: Vec<C64> = (k + 1..n).map(|i| a[idx(i, k)] / d).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    let li = l[ii];
                    for (jj, j) in (k + 1..n).enumerate() {
                        a[idx(i, j)] -= li * d * l[jj].conj();
                    }
                }
                steps.push(Step::One { k, swap: kp, d, l });
            } else {
                let d11 = a[idx(k, k)].re;
                let d22 = a[idx(k + 1, k + 1)].re;
                let d21 = a[idx(k + 1, k)];
                let det = d11 * d22 - d21.norm_sqr();
                if det.abs() <= tiny * tiny {
                    return Err(Breakdown { step: k, pivot: det.abs().sqrt() });
                }
                // inverse of [[d11, conj(d21)], [d21, d22]]
                let inv11 = d22 / det;
                let inv22 = d11 / det;
                let inv21 = -d21 / det;
                let m = n - k - 2;
                let mut l0 = Vec::with_capacity(m);
                let mut l1 = Vec::with_capacity(m);
                for i in k + 2..n {
                    let a0 = a[idx(i, k)];
                    let a1 = a[idx(i, k + 1)];
                    // row of A21 * D^{-1}
                    l0.push(a0 * inv11 + a1 * inv21);
                    l1.push(a0 * inv21.conj() + a1 * inv22);
                }
                for (ii, i) in (k + 2..n).enumerate() {
                    for j in k + 2..n {
                        // A21 D^{-1} A21^H = L21 A21^H
                        let upd = l0[ii] * a[idx(j, k)].conj() + l1[ii] * a[idx(j, k + 1)].conj();
                        a[idx(i, j)] -= upd;
                    }
                }
                steps.push(Step::Two {
                    k,
                    swap: kp,
                    d: [C64::new(d11, 0.0), d21, C64::new(d22, 0.0)],
                    l0,
                    l1,
                });
            }
            k += kstep;
        }
        Ok(BkFactor { n, steps })
    }

    /// Number of negative, zero-free eigenvalues by Sylvester's law.
    pub fn negative_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                Step::One { d, .. } => usize::from(*d < 0.0),
                Step::Two { d, .. } => {
                    let (a, b, c) = (d[0].re, d[1].norm(), d[2].re);
                    let mean = 0.5 * (a + c);
                    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                    usize::from(mean - rad < 0.0) + usize::from(mean + rad < 0.0)
                }
            })
            .sum()
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n);
        for s in &self.steps {
            match s {
                Step::One { k, swap, l, .. } => {
                    b.swap(*k, *swap);
                    let bk = b[*k];
                    for (ii, li) in l.iter().enumerate() {
                        b[k + 1 + ii] -= li * bk;
                    }
                }
                Step::Two { k, swap, l0, l1, .. } => {
                    b.swap(k + 1, *swap);
                    let (b0, b1) = (b[*k], b[k + 1]);
                    for ii in 0..l0.len() {
                        b[k + 2 + ii] -= l0[ii] * b0 + l1[ii] * b1;
                    }
                }
            }
        }
        for s in &self.steps {
            match s {
                Step::One { k, d, .. } => b[*k] /= *d,
                Step::Two { k, d, .. } => {
                    let (d11, d21, d22) = (d[0].re, d[1], d[2].re);
                    let det = d11 * d22 - d21.norm_sqr();
                    let (x0, x1) = (b[*k], b[k + 1]);
                    b[*k] = (x0 * d22 - d21.conj() * x1) / det;
                    b[k + 1] = (x1 * d11 - d21 * x0) / det;
                }
            }
        }
        for s in self.steps.iter().rev() {
            match s {
                Step::One { k, swap, l, .. } => {
                    let mut acc = b[*k];
                    for (ii, li) in l.iter().enumerate() {
                        acc -= li.conj() * b[k + 1 + ii];
                    }
                    b[*k] = acc;
                    b.swap(*k, *swap);
                }
                Step::Two { k, swap, l0, l1, .. } => {
                    let (mut a0, mut a1) = (b[*k], b[k + 1]);
                    for ii in 0..l0.len() {
                        a0 -= l0[ii].conj() * b[k + 2 + ii];
                        a1 -= l1[ii].conj() * b[k + 2 + ii];
                    }
                    b[*k] = a0;
                    b[k + 1] = a1;
                    b.swap(k + 1, *swap);
                }
            }
        }
    }
}

fn swap_sym(a: &mut [C64], n: usize, r: usize, s: usize) {
    for j in 0..n {
        a.swap(r * n + j, s * n + j);
    }
    for i in 0..n {
        a.swap(i * n + r, i * n + s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{jacobi_eigh, CMat};

    fn sample(n: usize, shift: f64) -> CMat {
        let m = CMat::from_fn(n, n, |i, j| {
            C64::new(((i * 5 + j * 3) % 7) as f64 - 3.0, (i as f64 - j as f64) * 0.2)
        });
        let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..n {
            h[(i, i)] -= C64::new(shift, 0.0);
        }
        // zero diagonal forces 2x2 pivots somewhere
        h[(0, 0)] = C64::new(0.0, 0.0);
        h
    }

    #[test]
    fn inertia_and_solve_match_dense() {
        for &shift in &[0.0, 1.3, -2.1, 4.7] {
            let h = sample(9, shift);
            let flat: Vec<C64> = (0..81).map(|k| h[(k / 9, k % 9)]).collect();
            let f = BkFactor::factor(flat, 9, 1e-13).unwrap();
            let (vals, _) = jacobi_eigh(&h, 1e-15).unwrap();
            assert_eq!(f.negative_count(), vals.iter().filter(|v| **v < 0.0).count());
            let b: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
            let mut x = b.clone();
            f.solve(&mut x);
            let xv = nalgebra::DVector::from_vec(x);
            let r = &h * xv - nalgebra::DVector::from_vec(b);
            assert!(r.norm() < 1e-11, "residual {}", r.norm());
        }
    }
}
