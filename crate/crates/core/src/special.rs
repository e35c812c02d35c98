//! Quadrature, special functions and small fitting helpers.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const BERNOULLI_2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `sum_{n>=0} (n + a)^{-s}` for `s > 1`, `a > 0`.
///
/// Direct summation up to a shifted argument, then an Euler-Maclaurin tail.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1, a > 0");
    let shift = if a >= 24.0 { 0 } else { (24.0 - a).ceil() as usize };
    let mut head = 0.0;
    for n in 0..shift {
        head += (n as f64 + a).powf(-s);
    }
    let x = shift as f64 + a;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s(s+1)...(s+2k-2) / (2k)! times x^{-s-2k+1}
    let mut fact = s / x.powf(s + 1.0) / 2.0;
    let mut k = 1;
    for b in BERNOULLI_2K {
        let term = b * fact;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let m = 2 * k;
        fact *= (s + m as f64 - 1.0) * (s + m as f64) / ((m + 1) as f64 * (m + 2) as f64) / (x * x);
        k += 1;
    }
    head + tail
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Bessel functions `J_0(x) .. J_n(x)` for `x >= 0` by Miller's backward recurrence.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_j_sequence needs x >= 0");
    let mut out = vec![0.0; n + 1];
    if x < 1e-300 {
        out[0] = 1.0;
        return out;
    }
    let big = (n as f64).max(x);
    let mut m = big.ceil() as usize + 30 + (160.0 * big).sqrt().ceil() as usize;
    m += m % 2;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds J_{k-1}
        if k - 1 <= n {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Ordinary least squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let residual_rms = (ss / nf).sqrt();
    let slope_stderr = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LinearFit {
        slope,
        intercept,
        residual_rms,
        slope_stderr,
    })
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        // zeta(s, 2) = zeta(s) - 1
        assert!((hurwitz_zeta(3.0, 2.0) - (zeta(3.0) - 1.0)).abs() < 1e-14);
        // brute force with a large a
        let direct: f64 = (0..200000).map(|n| (n as f64 + 30.5).powf(-2.5)).sum();
        let tail = (200000.0f64 + 30.5).powf(-1.5) / 1.5;
        assert!((hurwitz_zeta(2.5, 30.5) - direct - tail).abs() < 1e-11);
    }

    #[test]
    fn bessel_against_series() {
        // power series J_k(x) = sum (-1)^m (x/2)^{2m+k} / (m! (m+k)!)
        let series = |k: usize, x: f64| {
            let mut term = (x / 2.0).powi(k as i32) / (1..=k).map(|v| v as f64).product::<f64>();
            let mut sum = term;
            for m in 1..80 {
                term *= -(x / 2.0).powi(2) / (m as f64 * (m + k) as f64);
                sum += term;
            }
            sum
        };
        for &x in &[0.3, 1.0, 5.0] {
            let j = bessel_j_sequence(x, 20);
            for (k, v) in j.iter().enumerate() {
                assert!((v - series(k, x)).abs() < 1e-13, "J_{k}({x})");
            }
        }
        // the series cancels badly at x = 12; reference values to 17 digits
        let j = bessel_j_sequence(12.0, 20);
        let reference = [
            (0, 0.047689310796833537),
            (1, -0.22344710449062761),
            (2, -0.084930494878604805),
            (5, -0.073470963101658581),
            (11, 0.27041248255096448),
            (19, 0.00075898829531520356),
        ];
        for (k, v) in reference {
            assert!((j[k] - v).abs() < 1e-13, "J_{k}(12)");
        }
        // large argument: J_0(100) = 0.019985850304223122
        let j = bessel_j_sequence(100.0, 150);
        assert!((j[0] - 0.019985850304223122).abs() < 1e-13);
        let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && f.residual_rms < 1e-13);
    }
}
