use super::CMat;
use crate::{Error, Result, C64};

const MAX_SWEEPS: usize = 60;

/// Cyclic Jacobi eigensolver for a small Hermitian matrix.
///
/// Returns ascending eigenvalues and the unitary whose columns are the
/// eigenvectors. Sweeps stop once the off-diagonal Frobenius norm drops
/// below `tol` times the Frobenius norm of the input.
pub fn jacobi_eigh(m: &CMat, tol: f64) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    let mut a = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v = CMat::identity(n, n);
    let total = a.norm().max(f64::MIN_POSITIVE);
    let off = |a: &CMat| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= tol * total {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let pc = phase.conj();
                // columns: A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * pc * s;
                    a[(k, q)] = akp * s + akq * pc * c;
                }
                // rows: A <- J^H A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phase * s;
                    a[(q, k)] = apk * s + aqk * phase * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * pc * s;
                    v[(k, q)] = vkp * s + vkq * pc * c;
                }
            }
        }
    }
    if !converged && off(&a) > tol * total {
        return Err(Error::NonConvergence {
            what: "Jacobi eigensolver".into(),
            iterations: MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let vals = order.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}
