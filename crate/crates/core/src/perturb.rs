//! Boundedness, compactness and regularity of perturbations from the decay
//! of their matrix entries.
//!
//! Sums over infinite index ranges use closed forms (geometric series,
//! Hurwitz zeta) for the generator families, so every quantity below is a
//! statement about the infinite matrix rather than a finite window.

use crate::lattice::{smoothstep, theta, BandedBlockMatrix, LatticeWindow, LinearOperator, PerturbationKind, PerturbationSpec, VectorProfile};
use crate::linalg::{norm, spectral_norm, CMat, StartVectors};
use crate::special::{hurwitz_zeta, linear_fit};
use crate::{Result, C64};
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::sync::Arc;

pub const DEFAULT_K_MAX: u32 = 14;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 200;
/// Columns kept explicitly in masked norms, as a multiple of the radius.
const COLUMN_FACTOR: usize = 16;

/// `xi(x)`: 0 on `[0, 1/2]`, 1 on `[1, inf)`.
pub fn xi(x: f64) -> f64 {
    smoothstep(2.0 * x - 1.0)
}

fn bracket(i: i64) -> f64 {
    (1.0 + (i as f64).powi(2)).sqrt()
}

/// Nonnegative `p` with `theta(<p>/r) > 0`, with the weight.
fn annulus_theta(r: f64) -> Vec<(i64, f64)> {
    let lo = (r * r - 1.0).max(0.0).sqrt().floor() as i64;
    let hi = (4.0 * r * r - 1.0).sqrt().ceil() as i64;
    (lo.max(0)..=hi)
        .map(|p| (p, theta(bracket(p) / r)))
        .filter(|(_, t)| *t > 0.0)
        .collect()
}

/// Integers `p >= 0` with `r <= p <= 2r`.
fn annulus(r: f64) -> std::ops::RangeInclusive<i64> {
    (r.ceil() as i64)..=((2.0 * r).floor() as i64)
}

/// `sum_{n >= 0} (1 + n)^{-t}` starting at `n = m`, i.e. `zeta(t, 1 + m)`.
fn power_tail(t: f64, m: i64) -> f64 {
    if t <= 1.0 {
        f64::INFINITY
    } else {
        hurwitz_zeta(t, 1.0 + m as f64)
    }
}

/// A perturbation of the form `c <., u> u` (times a unit block pattern),
/// described by the profile `u_n >= 0`.
#[derive(Debug, Clone)]
enum Profile {
    Exp(f64),
    Pow(f64),
    Explicit(Vec<(i64, f64)>),
}

#[derive(Debug, Clone)]
struct RankOneForm {
    c: f64,
    amplitude: f64,
    profile: Profile,
    half_line: bool,
}

impl RankOneForm {
    fn u(&self, n: i64) -> f64 {
        if self.half_line && n < 0 {
            return 0.0;
        }
        self.amplitude
            * match &self.profile {
                Profile::Exp(k) => (-k * n.unsigned_abs() as f64).exp(),
                Profile::Pow(e) => (1.0 + n.unsigned_abs() as f64).powf(-e),
                Profile::Explicit(list) => list.iter().filter(|(m, _)| *m == n).map(|(_, v)| *v).sum(),
            }
    }

    /// `sum_{|n| >= m} u_n^t` (`m >= 0`).
    fn tail(&self, t: f64, m: i64) -> f64 {
        let sides = if self.half_line { 1.0 } else { 2.0 };
        let a = self.amplitude.abs().powf(t);
        match &self.profile {
            Profile::Exp(k) => {
                let q = (-t * k).exp();
                let one = q.powi(m as i32) / (1.0 - q);
                if m == 0 && !self.half_line {
                    a * (2.0 * one - 1.0)
                } else {
                    a * sides * one
                }
            }
            Profile::Pow(e) => {
                let one = power_tail(t * e, m);
                if m == 0 && !self.half_line {
                    a * (2.0 * one - 1.0)
                } else {
                    a * sides * one
                }
            }
            Profile::Explicit(list) => list
                .iter()
                .filter(|(n, _)| n.unsigned_abs() as i64 >= m && !(self.half_line && *n < 0))
                .map(|(_, v)| (self.amplitude * v).abs().powf(t))
                .sum(),
        }
    }

    fn l1(&self) -> f64 {
        self.tail(1.0, 0)
    }

    fn l2sq(&self) -> f64 {
        self.tail(2.0, 0)
    }

    fn sup(&self) -> f64 {
        match &self.profile {
            Profile::Explicit(list) => list
                .iter()
                .filter(|(n, _)| !(self.half_line && *n < 0))
                .map(|(_, v)| (self.amplitude * v).abs())
                .fold(0.0, f64::max),
            _ => self.amplitude.abs(),
        }
    }

    /// Sites that can carry mass inside `r <= |n| <= 2r`, both signs.
    fn signed(&self, p: i64) -> Vec<i64> {
        if p == 0 || self.half_line {
            vec![p]
        } else {
            vec![p, -p]
        }
    }

    /// `sum_n w(|n|)^2 u_n^2` for a weight supported on `|n| in [lo, hi]`
    /// and equal to one beyond `hi` when `tail_one`.
    fn weighted_l2sq(&self, lo: i64, hi: i64, w: impl Fn(i64) -> f64, tail_one: bool) -> f64 {
        let mut s = 0.0;
        for p in lo.max(0)..=hi {
            let wp = w(p);
            for n in self.signed(p) {
                s += (wp * self.u(n)).powi(2);
            }
        }
        if tail_one {
            s += self.tail(2.0, hi + 1);
        }
        s
    }
}

/// Schur bounds `r = sup_i sum_j |V_ij|`, `c = sup_j sum_i |V_ij|`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SchurBounds {
    pub r: f64,
    pub c: f64,
    pub bound: f64,
    /// False when the sums only cover a finite window.
    pub certified: bool,
}

/// Masked norm with its certified upper bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DyadicNorm {
    pub r: f64,
    pub norm: f64,
    pub upper: f64,
}

fn rank_one_form(spec: &PerturbationSpec) -> Option<RankOneForm> {
    let half_line = spec.half_line();
    match spec.kind() {
        PerturbationKind::Exponential { c, kappa } => Some(RankOneForm {
            c: *c,
            amplitude: 1.0,
            profile: Profile::Exp(*kappa),
            half_line,
        }),
        PerturbationKind::Separable { c, sigma } => Some(RankOneForm {
            c: *c,
            amplitude: 1.0,
            profile: Profile::Pow(*sigma),
            half_line,
        }),
        PerturbationKind::RankOne { strength, profile, .. } => {
            let (amplitude, profile) = match profile {
                VectorProfile::Exponential { amplitude, rate } => (*amplitude, Profile::Exp(*rate)),
                VectorProfile::Power { amplitude, exponent } => (*amplitude, Profile::Pow(*exponent)),
                VectorProfile::Explicit(list) => (1.0, Profile::Explicit(list.iter().map(|(n, v)| (*n, norm(v))).collect())),
            };
            Some(RankOneForm {
                c: strength.abs(),
                amplitude,
                profile,
                half_line,
            })
        }
        _ => None,
    }
}

fn explicit_table(spec: &PerturbationSpec) -> Option<Vec<(i64, i64, f64)>> {
    match spec.kind() {
        PerturbationKind::Entries(_) | PerturbationKind::Box { .. } => Some(
            spec.explicit_entries()
                .into_iter()
                .map(|(i, j, b)| (i, j, spectral_norm(&b)))
                .collect(),
        ),
        _ => None,
    }
}

/// Number of signed sites per `|i|` away from the origin.
fn sides(spec: &PerturbationSpec) -> f64 {
    if spec.half_line() {
        1.0
    } else {
        2.0
    }
}

/// `sum_j |V_ij|` for the non-rank-one generators.
fn row_l1(spec: &PerturbationSpec, i: i64) -> f64 {
    let a = i.unsigned_abs() as i64;
    match *spec.kind() {
        PerturbationKind::Power { c, s } => {
            if spec.half_line() {
                if i < 0 {
                    0.0
                } else {
                    c * power_tail(1.0 + s, a)
                }
            } else {
                c * ((1.0 + a as f64).powf(-1.0 - s) + 2.0 * power_tail(1.0 + s, a + 1))
            }
        }
        PerturbationKind::ToeplitzDecay { c, p } => {
            if p <= 1.0 {
                return f64::INFINITY;
            }
            if spec.half_line() {
                if i < 0 {
                    0.0
                } else {
                    c * (2.0 * power_tail(p, 0) - 1.0 - power_tail(p, a + 1))
                }
            } else {
                c * (2.0 * power_tail(p, 0) - 1.0)
            }
        }
        PerturbationKind::Diagonal { c } => {
            if spec.half_line() && i < 0 {
                0.0
            } else {
                c.abs()
            }
        }
        _ => unreachable!("row sums of explicit and rank-one kinds are handled separately"),
    }
}

/// `sum_j |V_ij|^2` for the non-rank-one generators.
fn row_l2sq(spec: &PerturbationSpec, i: i64) -> f64 {
    let a = i.unsigned_abs() as i64;
    if spec.half_line() && i < 0 {
        return 0.0;
    }
    match *spec.kind() {
        PerturbationKind::Power { c, s } => {
            let t = 2.0 + 2.0 * s;
            if spec.half_line() {
                c * c * power_tail(t, a)
            } else {
                c * c * ((1.0 + a as f64).powf(-t) + 2.0 * power_tail(t, a + 1))
            }
        }
        PerturbationKind::ToeplitzDecay { c, p } => {
            let t = 2.0 * p;
            if t <= 1.0 {
                return f64::INFINITY;
            }
            if spec.half_line() {
                c * c * (2.0 * power_tail(t, 0) - 1.0 - power_tail(t, a + 1))
            } else {
                c * c * (2.0 * power_tail(t, 0) - 1.0)
            }
        }
        PerturbationKind::Diagonal { c } => c * c,
        _ => unreachable!("row sums of explicit and rank-one kinds are handled separately"),
    }
}

pub fn schur_bounds(spec: &PerturbationSpec) -> SchurBounds {
    let r = if let Some(f) = rank_one_form(spec) {
        f.c * f.sup() * f.l1()
    } else if let Some(t) = explicit_table(spec) {
        let mut rows = std::collections::BTreeMap::<i64, f64>::new();
        for (i, _, m) in &t {
            *rows.entry(*i).or_default() += m;
        }
        rows.values().copied().fold(0.0, f64::max)
    } else {
        match spec.kind() {
            PerturbationKind::Power { .. } | PerturbationKind::Diagonal { .. } => row_l1(spec, 0),
            PerturbationKind::ToeplitzDecay { .. } => {
                if spec.half_line() {
                    // row sums increase toward the two-sided value
                    row_l1(&two_sided(spec), 0)
                } else {
                    row_l1(spec, 0)
                }
            }
            _ => unreachable!(),
        }
    };
    // |V_ij| = |V_ji| for Hermitian V
    SchurBounds {
        r,
        c: r,
        bound: r,
        certified: true,
    }
}

fn two_sided(spec: &PerturbationSpec) -> PerturbationSpec {
    PerturbationSpec::new(spec.kind().clone(), false, spec.block_size()).expect("validated spec")
}

/// `(sum_ij |V_ij|^2)^{1/2}`, infinite when the sum diverges.
pub fn hs_norm(spec: &PerturbationSpec) -> f64 {
    if let Some(f) = rank_one_form(spec) {
        return f.c * f.l2sq();
    }
    if let Some(t) = explicit_table(spec) {
        return t.iter().map(|(_, _, m)| m * m).sum::<f64>().sqrt();
    }
    match *spec.kind() {
        PerturbationKind::Power { c, s } => {
            if spec.half_line() {
                c * power_tail(1.0 + 2.0 * s, 0).sqrt()
            } else {
                let t = 2.0 + 2.0 * s;
                let sum = 1.0 + 4.0 * (power_tail(t - 1.0, 1) - power_tail(t, 1));
                c * sum.sqrt()
            }
        }
        PerturbationKind::ToeplitzDecay { .. } => f64::INFINITY,
        PerturbationKind::Diagonal { c } => {
            if c == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        _ => unreachable!(),
    }
}

/// Operator norm when it has a closed form, otherwise `min(Schur, HS)`.
pub fn norm_bound(spec: &PerturbationSpec) -> f64 {
    if let Some(f) = rank_one_form(spec) {
        return f.c * f.l2sq();
    }
    if let PerturbationKind::Diagonal { c } = spec.kind() {
        return c.abs();
    }
    schur_bounds(spec).bound.min(hs_norm(spec))
}

/// `(n_V(r), p_V(r))` over the annulus `r <= |i| <= 2r`.
pub fn nv_pv(spec: &PerturbationSpec, r: f64) -> (f64, f64) {
    let rows: Vec<i64> = annulus(r)
        .flat_map(|p| if spec.half_line() { vec![p] } else { vec![p, -p] })
        .collect();
    if let Some(f) = rank_one_form(spec) {
        let ann_u: Vec<f64> = rows.iter().map(|i| f.u(*i)).collect();
        let row_sup = ann_u.iter().fold(0.0f64, |a, u| a.max(*u)) * f.c * f.l1();
        let col_sup = f.c * f.sup() * ann_u.iter().sum::<f64>();
        let p = f.c * f.c * ann_u.iter().map(|u| u * u).sum::<f64>() * f.l2sq();
        return (zero_times_inf(row_sup * col_sup), p);
    }
    if let Some(t) = explicit_table(spec) {
        let in_ann = |i: i64| {
            let a = i.unsigned_abs() as f64;
            a >= r && a <= 2.0 * r
        };
        let mut row = std::collections::BTreeMap::<i64, f64>::new();
        let mut col = std::collections::BTreeMap::<i64, f64>::new();
        let mut p = 0.0;
        for (i, j, m) in t.iter().filter(|(i, _, _)| in_ann(*i)) {
            *row.entry(*i).or_default() += m;
            *col.entry(*j).or_default() += m;
            p += m * m;
        }
        let n = row.values().copied().fold(0.0, f64::max) * col.values().copied().fold(0.0, f64::max);
        return (n, p);
    }
    let row_sup = rows.iter().map(|i| row_l1(spec, *i)).fold(0.0, f64::max);
    let p: f64 = rows.iter().map(|i| row_l2sq(spec, *i)).sum();
    let col_sup = match *spec.kind() {
        PerturbationKind::Power { c, s } => rows.iter().map(|i| c * (1.0 + i.unsigned_abs() as f64).powf(-1.0 - s)).sum(),
        PerturbationKind::ToeplitzDecay { c, p } => {
            // largest column sum sits near the middle of an annulus component
            let mid = (1.5 * r).round() as i64;
            [mid - 1, mid, mid + 1]
                .iter()
                .map(|j| rows.iter().map(|i| c * (1.0 + (i - j).unsigned_abs() as f64).powf(-p)).sum::<f64>())
                .fold(0.0, f64::max)
        }
        PerturbationKind::Diagonal { c } => {
            if rows.is_empty() {
                0.0
            } else {
                c.abs()
            }
        }
        _ => unreachable!(),
    };
    (zero_times_inf(row_sup * col_sup), p)
}

fn zero_times_inf(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x
    }
}

/// `|theta(<N>/r) V|` for one radius.
pub fn dyadic_norm(spec: &PerturbationSpec, r: f64) -> DyadicNorm {
    let ann = annulus_theta(r);
    if let Some(f) = rank_one_form(spec) {
        let mut s = 0.0;
        for (p, t) in &ann {
            for n in f.signed(*p) {
                s += (t * f.u(n)).powi(2);
            }
        }
        let v = f.c * s.sqrt() * f.l2sq().sqrt();
        return DyadicNorm {
            r,
            norm: zero_times_inf(v),
            upper: zero_times_inf(v),
        };
    }
    if let Some(t) = explicit_table(spec) {
        let v = explicit_masked_norm(spec, &t, |i| theta(bracket(i) / r));
        return DyadicNorm { r, norm: v, upper: v };
    }
    match *spec.kind() {
        PerturbationKind::Diagonal { c } => {
            let v = c.abs() * ann.iter().map(|(_, t)| *t).fold(0.0, f64::max);
            DyadicNorm { r, norm: v, upper: v }
        }
        PerturbationKind::Power { c, s } => hankel_masked_norm(c, s, &ann, spec.half_line(), r),
        PerturbationKind::ToeplitzDecay { c, p } => toeplitz_masked_norm(c, p, &ann, spec.half_line(), r),
        _ => unreachable!(),
    }
}

fn explicit_masked_norm(spec: &PerturbationSpec, t: &[(i64, i64, f64)], w: impl Fn(i64) -> f64) -> f64 {
    let nb = spec.block_size();
    let mut rows: Vec<i64> = t.iter().map(|e| e.0).filter(|i| w(*i) > 0.0).collect();
    rows.sort_unstable();
    rows.dedup();
    let mut cols: Vec<i64> = t.iter().map(|e| e.1).collect();
    cols.sort_unstable();
    cols.dedup();
    if rows.is_empty() {
        return 0.0;
    }
    let mut m = CMat::zeros(rows.len() * nb, cols.len() * nb);
    for (a, i) in rows.iter().enumerate() {
        let wi = w(*i);
        for (b, j) in cols.iter().enumerate() {
            let blk = spec.block(*i, *j);
            for x in 0..nb {
                for y in 0..nb {
                    m[(a * nb + x, b * nb + y)] = blk[(x, y)] * wi;
                }
            }
        }
    }
    spectral_norm(&m)
}

/// Linear correlation `out[q] = sum_a f[q + a] g[a]` by FFT, for `q < rows`.
struct Correlator {
    size: usize,
    f_hat: Vec<C64>,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
}

impl Correlator {
    fn new(f: &[f64], max_input: usize) -> Self {
        let size = (f.len() + max_input).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut f_hat: Vec<C64> = f.iter().map(|v| C64::new(*v, 0.0)).collect();
        f_hat.resize(size, C64::new(0.0, 0.0));
        fwd.process(&mut f_hat);
        Correlator { size, f_hat, fwd, inv }
    }

    fn correlate(&self, g: &[f64], rows: usize) -> Vec<f64> {
        let n = g.len();
        let mut buf = vec![C64::new(0.0, 0.0); self.size];
        for (m, v) in g.iter().rev().enumerate() {
            buf[m] = C64::new(*v, 0.0);
        }
        self.fwd.process(&mut buf);
        for (b, f) in buf.iter_mut().zip(&self.f_hat) {
            *b *= f;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        (0..rows).map(|q| buf[q + n - 1].re * scale).collect()
    }
}

/// Perron power iteration for a nonnegative operator given by `fwd` and `adj`.
fn positive_power<F: Fn(&[f64]) -> Vec<f64>, G: Fn(&[f64]) -> Vec<f64>>(cols: usize, fwd: F, adj: G) -> f64 {
    let mut x = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = fwd(&x);
        let s = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let z = adj(&y);
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nz == 0.0 {
            return s;
        }
        x = z.into_iter().map(|v| v / nz).collect();
        let done = (s - sigma).abs() <= POWER_TOL * s;
        sigma = s;
        if done {
            break;
        }
    }
    sigma
}

/// `|theta(<N>/r) V|` for `|V_ij| = c (1 + |i| + |j|)^{-1-s}`: a weighted
/// Hankel kernel on `|i|`, `|j|` after folding the signs.
fn hankel_masked_norm(c: f64, s: f64, ann: &[(i64, f64)], half_line: bool, r: f64) -> DyadicNorm {
    if ann.is_empty() {
        return DyadicNorm { r, norm: 0.0, upper: 0.0 };
    }
    let mult = |p: i64| if half_line || p == 0 { 1.0 } else { 2.0f64 };
    let p0 = ann[0].0;
    let rows = ann.len();
    let j_cols = COLUMN_FACTOR * (ann[rows - 1].0 as usize + 1);
    let f: Vec<f64> = (0..rows + j_cols)
        .map(|t| c * (1.0 + (p0 + t as i64) as f64).powf(-1.0 - s))
        .collect();
    let corr = Correlator::new(&f, j_cols.max(rows));
    let row_w: Vec<f64> = ann.iter().map(|(p, t)| t * mult(*p).sqrt()).collect();
    let col_w: Vec<f64> = (0..j_cols as i64).map(|a| mult(a).sqrt()).collect();
    let fwd = |x: &[f64]| -> Vec<f64> {
        let g: Vec<f64> = x.iter().zip(&col_w).map(|(a, b)| a * b).collect();
        corr.correlate(&g, rows).iter().zip(&row_w).map(|(a, b)| a * b).collect()
    };
    let adj = |y: &[f64]| -> Vec<f64> {
        let g: Vec<f64> = y.iter().zip(&row_w).map(|(a, b)| a * b).collect();
        corr.correlate(&g, j_cols).iter().zip(&col_w).map(|(a, b)| a * b).collect()
    };
    let v = positive_power(j_cols, fwd, adj);
    // Schur bound of the dropped columns a >= J
    let j = j_cols as i64;
    let wmax = row_w.iter().copied().fold(0.0, f64::max);
    let wsum: f64 = row_w.iter().sum();
    let rt = wmax * 2f64.sqrt() * c * power_tail(1.0 + s, p0 + j);
    let ct = 2f64.sqrt() * c * (1.0 + (p0 + j) as f64).powf(-1.0 - s) * wsum;
    DyadicNorm {
        r,
        norm: v,
        upper: v + (rt * ct).sqrt(),
    }
}

/// `|theta(<N>/r) V|` for `|V_ij| = c (1 + |i - j|)^{-p}` by convolution.
fn toeplitz_masked_norm(c: f64, p: f64, ann: &[(i64, f64)], half_line: bool, r: f64) -> DyadicNorm {
    if p <= 1.0 {
        return DyadicNorm {
            r,
            norm: f64::INFINITY,
            upper: f64::INFINITY,
        };
    }
    if ann.is_empty() {
        return DyadicNorm { r, norm: 0.0, upper: 0.0 };
    }
    let pmax = ann[ann.len() - 1].0;
    let extra = COLUMN_FACTOR as i64 * (pmax + 1);
    // rows: signed annulus sites; columns: a contiguous range around them
    let mut rows: Vec<(i64, f64)> = ann.to_vec();
    if !half_line {
        rows.extend(ann.iter().filter(|(q, _)| *q > 0).map(|(q, t)| (-q, *t)));
    }
    rows.sort_by_key(|e| e.0);
    let col_lo = if half_line { 0 } else { -(pmax + extra) };
    let col_hi = pmax + extra;
    let ncols = (col_hi - col_lo + 1) as usize;
    let row_lo = rows[0].0;
    let span = (rows[rows.len() - 1].0 - row_lo + 1) as usize;
    // out[q] = sum_a t(row_lo + q - col_lo - a') ... written as a correlation with offset
    let off = row_lo - col_lo; // row index relative to columns
    let kernel: Vec<f64> = (0..span + ncols)
        .map(|t| {
            let d = off + t as i64 - (ncols as i64 - 1);
            c * (1.0 + d.unsigned_abs() as f64).powf(-p)
        })
        .collect();
    let corr = Correlator::new(&kernel, ncols.max(span));
    let mut mask = vec![0.0; span];
    for (q, t) in &rows {
        mask[(q - row_lo) as usize] = *t;
    }
    // (T x)[row] = sum_a t(row - a) x_a; with x reversed this is a correlation
    let fwd = |x: &[f64]| -> Vec<f64> {
        let xr: Vec<f64> = x.iter().rev().copied().collect();
        corr.correlate(&xr, span).iter().zip(&mask).map(|(a, b)| a * b).collect()
    };
    let adj = |y: &[f64]| -> Vec<f64> {
        let g: Vec<f64> = y.iter().zip(&mask).map(|(a, b)| a * b).collect();
        let mut out = corr.correlate(&g, ncols);
        out.reverse();
        out
    };
    let v = positive_power(ncols, fwd, adj);
    let tmax = mask.iter().copied().fold(0.0, f64::max);
    let tail = tmax * 2.0 * c * power_tail(p, extra);
    DyadicNorm { r, norm: v, upper: v + tail }
}

/// `|theta(<N>/r) V|` for `r = 2^k`, `k = 0..=k_max`.
pub fn dyadic_profile(spec: &PerturbationSpec, k_max: u32) -> Vec<DyadicNorm> {
    (0..=k_max)
        .into_par_iter()
        .map(|k| dyadic_norm(spec, 2f64.powi(k as i32)))
        .collect()
}

/// `|theta(<N>/r) V|` of an assembled window matrix, by power iteration.
pub fn masked_window_norm(v: &BandedBlockMatrix, r: f64) -> f64 {
    let w: LatticeWindow = *v.window();
    let nb = w.block_size;
    let mask: Vec<f64> = (0..w.dim())
        .map(|i| theta(bracket(w.position(i / nb)) / r))
        .collect();
    if mask.iter().all(|m| *m == 0.0) {
        return 0.0;
    }
    let mut x = StartVectors::new(crate::DEFAULT_SEED).vector(w.dim());
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y: Vec<C64> = v.apply(&x).iter().zip(&mask).map(|(a, m)| a * m).collect();
        let s = norm(&y);
        let masked: Vec<C64> = y.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let z = v.apply(&masked);
        let nz = norm(&z);
        if nz == 0.0 {
            return s;
        }
        x = z.into_iter().map(|a| a / nz).collect();
        let done = (s - sigma).abs() <= 1e-12 * s;
        sigma = s;
        if done {
            break;
        }
    }
    sigma
}

/// Verdict of a numerical sufficient-condition check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckVerdict::Pass => "pass",
            CheckVerdict::Fail => "fail",
            CheckVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct C11Result {
    pub verdict: CheckVerdict,
    /// Slope of `log2(2^k norm_k)` against `k` over the fit window.
    pub slope: f64,
    pub residual: f64,
    pub fit_window: (u32, u32),
    /// `sum_k 2^k norm_k` over the computed radii.
    pub partial_integral: f64,
    pub note: String,
}

/// Norms at or below this fraction of the largest count as exact zeros.
pub const ZERO_FLOOR: f64 = 1e-16;

fn tail_window(norms: &[DyadicNorm]) -> (usize, usize) {
    let k_max = norms.len() - 1;
    (k_max / 2, k_max)
}

fn c11_window(norms: &[DyadicNorm]) -> C11Result {
    let (lo, hi) = tail_window(norms);
    let peak = norms.iter().map(|d| d.norm).fold(0.0, f64::max);
    let partial_integral: f64 = norms.iter().map(|d| d.r * d.norm).sum();
    let mk = |verdict, slope, residual, note: &str| C11Result {
        verdict,
        slope,
        residual,
        fit_window: (lo as u32, hi as u32),
        partial_integral,
        note: note.to_string(),
    };
    if norms.iter().any(|d| !d.norm.is_finite()) {
        return mk(CheckVerdict::Fail, f64::INFINITY, 0.0, "masked norms are infinite");
    }
    let live: Vec<(f64, f64)> = (lo..=hi)
        .filter(|k| norms[*k].norm > ZERO_FLOOR * peak)
        .map(|k| (k as f64, (norms[k].r * norms[k].norm).log2()))
        .collect();
    if live.is_empty() {
        return mk(CheckVerdict::Pass, f64::NEG_INFINITY, 0.0, "masked norms vanish at large radii");
    }
    if live.len() < 3 {
        return mk(CheckVerdict::Pass, f64::NEG_INFINITY, 0.0, "masked norms drop to zero inside the fit window");
    }
    let x: Vec<f64> = live.iter().map(|p| p.0).collect();
    let y: Vec<f64> = live.iter().map(|p| p.1).collect();
    let fit = linear_fit(&x, &y).expect("distinct radii");
    let decreasing = y.windows(2).all(|w| w[1] <= w[0]);
    let drop = y[0] - y[y.len() - 1];
    if fit.slope < -0.1 && (fit.residual_rms <= 0.2 || (decreasing && drop >= 10.0)) {
        mk(CheckVerdict::Pass, fit.slope, fit.residual_rms, "dyadic tail is summable")
    } else if fit.residual_rms > 0.2 {
        mk(CheckVerdict::Inconclusive, fit.slope, fit.residual_rms, "fit residual above 0.2")
    } else {
        mk(CheckVerdict::Fail, fit.slope, fit.residual_rms, "dyadic tail is not summable")
    }
}

/// The (C1,1) check: `sum_k 2^k |theta(<N>/2^k) V|` has a summable tail.
/// The verdict must agree with the one obtained from one fewer radius.
pub fn c11_test(norms: &[DyadicNorm]) -> C11Result {
    let mut full = c11_window(norms);
    if norms.len() >= 4 {
        let shorter = c11_window(&norms[..norms.len() - 1]);
        if shorter.verdict != full.verdict && full.verdict != CheckVerdict::Inconclusive {
            full.verdict = CheckVerdict::Inconclusive;
            full.note = format!("verdict changes with the last radius ({})", shorter.verdict);
        }
    }
    full
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CsFit {
    /// `-slope` of `log norm` against `log r`; infinite when norms vanish.
    pub s_fit: f64,
    pub stderr: f64,
    pub residual: f64,
    pub inconclusive: bool,
}

pub fn cs_exponent(norms: &[DyadicNorm]) -> CsFit {
    let (lo, hi) = tail_window(norms);
    let peak = norms.iter().map(|d| d.norm).fold(0.0, f64::max);
    let live: Vec<&DyadicNorm> = norms[lo..=hi].iter().filter(|d| d.norm > ZERO_FLOOR * peak).collect();
    if live.iter().any(|d| !d.norm.is_finite()) {
        return CsFit {
            s_fit: f64::NEG_INFINITY,
            stderr: 0.0,
            residual: 0.0,
            inconclusive: true,
        };
    }
    if live.len() < 3 {
        return CsFit {
            s_fit: f64::INFINITY,
            stderr: 0.0,
            residual: 0.0,
            inconclusive: false,
        };
    }
    let x: Vec<f64> = live.iter().map(|d| d.r.ln()).collect();
    let y: Vec<f64> = live.iter().map(|d| d.norm.ln()).collect();
    let fit = linear_fit(&x, &y).expect("distinct radii");
    CsFit {
        s_fit: -fit.slope,
        stderr: fit.slope_stderr,
        residual: fit.residual_rms,
        inconclusive: fit.residual_rms > 0.2,
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CompactnessResult {
    pub verdict: CheckVerdict,
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
}

/// `|xi(|N|/r) V|` through closed forms (rank-one kinds) or the Schur bound
/// of the masked matrix.
pub fn xi_masked_norm(spec: &PerturbationSpec, r: f64) -> f64 {
    let lo = (0.5 * r).floor() as i64;
    let hi = r.ceil() as i64;
    let w = |p: i64| xi(p as f64 / r);
    if let Some(f) = rank_one_form(spec) {
        let s = f.weighted_l2sq(lo, hi, w, true);
        return zero_times_inf(f.c * s.sqrt() * f.l2sq().sqrt());
    }
    if let Some(t) = explicit_table(spec) {
        return explicit_masked_norm(spec, &t, |i| xi(i.unsigned_abs() as f64 / r));
    }
    let signed = |p: i64| if spec.half_line() || p == 0 { vec![p] } else { vec![p, -p] };
    match *spec.kind() {
        PerturbationKind::Diagonal { c } => c.abs(),
        PerturbationKind::ToeplitzDecay { .. } => {
            // both Schur sums tend to the full row sum
            schur_bounds(spec).bound
        }
        PerturbationKind::Power { c, s } => {
            let rows = (lo..=hi)
                .flat_map(signed)
                .map(|i| w(i.abs()) * row_l1(spec, i))
                .fold(0.0, f64::max)
                .max(row_l1(spec, hi + 1));
            let cols = (lo..=hi)
                .flat_map(signed)
                .map(|i| w(i.abs()) * c * (1.0 + i.unsigned_abs() as f64).powf(-1.0 - s))
                .sum::<f64>()
                + sides(spec) * c * power_tail(1.0 + s, hi + 1);
            (rows * cols).sqrt()
        }
        _ => unreachable!(),
    }
}

/// Compactness through `|xi(|N|/r) V| -> 0` on dyadic radii up to `r_max`.
pub fn compactness_test(spec: &PerturbationSpec, r_max: f64) -> CompactnessResult {
    let mut radii = Vec::new();
    let mut r = 1.0;
    while r <= r_max {
        radii.push(r);
        r *= 2.0;
    }
    let norms: Vec<f64> = radii.iter().map(|r| xi_masked_norm(spec, *r)).collect();
    let total = norm_bound(spec);
    let tail = radii.len() / 2;
    let live: Vec<(f64, f64)> = radii[tail..]
        .iter()
        .zip(&norms[tail..])
        .filter(|(_, n)| **n > 0.0)
        .map(|(r, n)| (r.ln(), n.ln()))
        .collect();
    let slope = if live.len() >= 2 {
        let x: Vec<f64> = live.iter().map(|p| p.0).collect();
        let y: Vec<f64> = live.iter().map(|p| p.1).collect();
        linear_fit(&x, &y).map_or(0.0, |f| f.slope)
    } else {
        f64::NEG_INFINITY
    };
    let last = *norms.last().unwrap_or(&0.0);
    let verdict = if last == 0.0 || (last <= 1e-3 * total && slope < 0.0) {
        CheckVerdict::Pass
    } else if !last.is_finite() || slope.abs() < 0.05 {
        CheckVerdict::Inconclusive
    } else {
        CheckVerdict::Fail
    };
    CompactnessResult {
        verdict,
        radii,
        norms,
        slope,
    }
}

/// Everything the classification report needs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayProfile {
    pub r_grid: Vec<f64>,
    pub dyadic_norms: Vec<f64>,
    pub dyadic_upper: Vec<f64>,
    pub schur: SchurBounds,
    pub hs_norm: f64,
    pub norm_bound: f64,
    pub n_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub bounded: bool,
    pub compact: CompactnessResult,
    pub c11: C11Result,
    pub cs: CsFit,
}

pub fn classify(spec: &PerturbationSpec, k_max: u32) -> Result<DecayProfile> {
    let dyad = dyadic_profile(spec, k_max);
    let (n_values, p_values): (Vec<f64>, Vec<f64>) = dyad.iter().map(|d| nv_pv(spec, d.r)).unzip();
    let schur = schur_bounds(spec);
    let hs = hs_norm(spec);
    let nb = norm_bound(spec);
    Ok(DecayProfile {
        r_grid: dyad.iter().map(|d| d.r).collect(),
        dyadic_norms: dyad.iter().map(|d| d.norm).collect(),
        dyadic_upper: dyad.iter().map(|d| d.upper).collect(),
        schur,
        hs_norm: hs,
        norm_bound: nb,
        n_values,
        p_values,
        bounded: nb.is_finite(),
        compact: compactness_test(spec, 2f64.powi(k_max as i32)),
        c11: c11_test(&dyad),
        cs: cs_exponent(&dyad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PerturbationKind, half: bool) -> PerturbationSpec {
        PerturbationSpec::new(kind, half, 1).unwrap()
    }

    #[test]
    fn xi_shape() {
        assert_eq!(xi(0.3), 0.0);
        assert_eq!(xi(1.2), 1.0);
        assert!((xi(0.75) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn annulus_rows_match_theta_support() {
        for r in [1.0, 2.0, 8.0, 100.0] {
            for (p, t) in annulus_theta(r) {
                assert!(t > 0.0 && bracket(p) > r && bracket(p) < 2.0 * r);
            }
            let count = (0..1000).filter(|p| theta(bracket(*p) / r) > 0.0).count();
            assert_eq!(count, annulus_theta(r).len());
        }
    }

    #[test]
    fn correlator_matches_direct_sum() {
        let f: Vec<f64> = (0..40).map(|t| 1.0 / (1.0 + t as f64)).collect();
        let g: Vec<f64> = (0..25).map(|t| (t as f64 * 0.3).sin()).collect();
        let c = Correlator::new(&f, 25);
        let out = c.correlate(&g, 15);
        for q in 0..15 {
            let direct: f64 = (0..25).map(|a| f[q + a] * g[a]).sum();
            assert!((out[q] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_tails_match_direct_sums() {
        let s = spec(PerturbationKind::Separable { c: 1.0, sigma: 1.3 }, false);
        let f = rank_one_form(&s).unwrap();
        let direct: f64 = (-200000i64..=200000).map(|n| f.u(n).powi(2)).sum();
        let tail = 2.0 * (200001f64).powf(-1.6) / 1.6;
        assert!((f.l2sq() - direct - tail).abs() < 1e-9);
        let e = spec(PerturbationKind::Exponential { c: 1.0, kappa: 0.7 }, false);
        let f = rank_one_form(&e).unwrap();
        let direct: f64 = (-200i64..=200).filter(|n| n.abs() >= 3).map(|n| f.u(n)).sum();
        assert!((f.tail(1.0, 3) - direct).abs() < 1e-14);
    }
}
