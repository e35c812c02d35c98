//! Smooth bumps and plateau windows.

use crate::special::gauss_legendre;
use std::sync::OnceLock;

/// `theta(x) = exp(-1/((x-1)(2-x)))` on `(1, 2)`, zero elsewhere.
pub fn theta(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        (-1.0 / ((x - 1.0) * (2.0 - x))).exp()
    }
}

/// `theta_tilde(x) = exp(-x^2/(4-x^2))` on `(-2, 2)`, zero elsewhere.
pub fn theta_tilde(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (-x * x / (4.0 - x * x)).exp()
    }
}

fn unit_bump(s: f64) -> f64 {
    theta(1.0 + s)
}

static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    RULE.get_or_init(|| gauss_legendre(16))
}

/// `int_0^t` of the unit bump for `0 <= t <= 1/2`, on panels graded toward 0.
fn partial_integral(t: f64) -> f64 {
    let (x, w) = rule();
    let mut total = 0.0;
    let mut hi = t;
    for _ in 0..14 {
        let lo = 0.5 * hi;
        let (m, r) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        total += x.iter().zip(w).map(|(xi, wi)| wi * unit_bump(m + r * xi)).sum::<f64>() * r;
        hi = lo;
    }
    total
}

fn full_integral() -> f64 {
    static FULL: OnceLock<f64> = OnceLock::new();
    *FULL.get_or_init(|| 2.0 * partial_integral(0.5))
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, the normalized integral of
/// the unit bump in between.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else if t <= 0.5 {
        partial_integral(t) / full_integral()
    } else {
        1.0 - partial_integral(1.0 - t) / full_integral()
    }
}

/// Window equal to 1 on `[inner.0, inner.1]`, 0 outside `(outer.0, outer.1)`,
/// with smooth-step shoulders.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PlateauWindow {
    pub outer: (f64, f64),
    pub inner: (f64, f64),
}

impl PlateauWindow {
    pub fn new(outer: (f64, f64), inner: (f64, f64)) -> Self {
        assert!(
            outer.0 <= inner.0 && inner.0 <= inner.1 && inner.1 <= outer.1,
            "plateau window needs nested intervals"
        );
        PlateauWindow { outer, inner }
    }

    /// Plateau on `[lo, hi]` with shoulders of width `margin` on each side.
    pub fn around(lo: f64, hi: f64, margin: f64) -> Self {
        Self::new((lo - margin, hi + margin), (lo, hi))
    }

    /// Support `[lo, hi]`, plateau shrunk by `fraction` of the length at each end.
    pub fn inside(lo: f64, hi: f64, fraction: f64) -> Self {
        let m = fraction * (hi - lo);
        Self::new((lo, hi), (lo + m, hi - m))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.outer;
        let (c, d) = self.inner;
        let left = if c > a { smoothstep((x - a) / (c - a)) } else if x >= a { 1.0 } else { 0.0 };
        let right = if b > d { smoothstep((b - x) / (b - d)) } else if x <= b { 1.0 } else { 0.0 };
        left * right
    }
}

/// The fixed bumps used by Besov and dyadic norms.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowFunctions;

impl WindowFunctions {
    pub fn theta(&self, x: f64) -> f64 {
        theta(x)
    }

    pub fn theta_tilde(&self, x: f64) -> f64 {
        theta_tilde(x)
    }
}
