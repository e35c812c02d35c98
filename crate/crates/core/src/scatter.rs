//! Time evolution and scattering diagnostics on finite sections.

use crate::eig::{ChebyshevFilter, ValidatedEigenpair};
use crate::lattice::{weight_vector, BandedBlockMatrix, CompiledBand, LatticeWindow, LinearOperator, PlateauWindow};
use crate::linalg::{dot, norm, CMat, StartVectors};
use crate::special::{bessel_j_sequence, linear_fit};
use crate::symbol::bands::resolved_eig;
use crate::symbol::{BandStructure, MatrixSymbol};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use rustfft::FftPlanner;

pub const DEFAULT_PROP_EPS: f64 = 1e-8;
/// Fraction of the window checked for mass reaching the boundary.
pub const OUTER_FRACTION: f64 = 0.05;
pub const FRONT_GATE: f64 = 1e-6;
const HULL_MARGIN: f64 = 0.05;
const RUNAWAY: f64 = 10.0;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Spectral hull and accuracy of the Chebyshev propagator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PropagatorPlan {
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
}

impl PropagatorPlan {
    /// Hull `[lo, hi]` widened by 5% of its length on each side.
    pub fn new(lo: f64, hi: f64, eps: f64) -> Result<Self> {
        if !(hi >= lo) || !(eps > 0.0) {
            return Err(Error::precondition("propagator needs lo <= hi and eps > 0"));
        }
        let pad = HULL_MARGIN * (hi - lo).max(1e-3);
        Ok(PropagatorPlan {
            lo: lo - pad,
            hi: hi + pad,
            eps,
        })
    }

    /// Plan covering the Gershgorin hulls of all given matrices.
    pub fn for_matrices(ms: &[&BandedBlockMatrix], eps: f64) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in ms {
            let (a, b) = m.gershgorin();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Self::new(lo, hi, eps)
    }

    fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Degree and coefficients `J_k(a |t|)` with `2 sum_{k > N} |J_k| <= eps`.
    pub fn bessel_coefficients(&self, t: f64) -> (usize, Vec<f64>) {
        let x = self.half_width() * t.abs();
        let n = (1.3 * x + 10.0 * x.cbrt() + 40.0).ceil() as usize;
        let j = bessel_j_sequence(x, n);
        let mut tail = 0.0;
        let mut degree = n;
        for k in (1..=n).rev() {
            tail += 2.0 * j[k].abs();
            if tail > self.eps {
                break;
            }
            degree = k - 1;
        }
        (degree, j[..=degree].to_vec())
    }

    pub fn degree(&self, t: f64) -> usize {
        self.bessel_coefficients(t).0
    }
}

/// `e^{-iHt} psi` by the Chebyshev-Bessel expansion.
pub fn chebyshev_propagate<A: LinearOperator + ?Sized>(h: &A, psi: &[C64], t: f64, plan: &PropagatorPlan) -> Result<Vec<C64>> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi.len(),
        });
    }
    if t == 0.0 {
        return Ok(psi.to_vec());
    }
    let (degree, j) = plan.bessel_coefficients(t);
    let c = plan.center();
    let a = plan.half_width();
    let x_op = |v: &[C64], out: &mut [C64]| {
        h.apply_into(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = (*o - vi * c) / a;
        }
    };
    // (-i sgn t)^k
    let step = C64::new(0.0, -t.signum());
    let limit = RUNAWAY * norm(psi).max(1e-300);
    let mut acc: Vec<C64> = psi.iter().map(|v| v * j[0]).collect();
    let mut prev = psi.to_vec();
    let mut cur = vec![ZERO; psi.len()];
    x_op(psi, &mut cur);
    let mut phase = step;
    let mut next = vec![ZERO; psi.len()];
    for (k, jk) in j.iter().enumerate().skip(1) {
        let coef = phase * (2.0 * jk);
        for (a, v) in acc.iter_mut().zip(&cur) {
            *a += coef * v;
        }
        if k == degree {
            break;
        }
        x_op(&cur, &mut next);
        for (nx, pv) in next.iter_mut().zip(&prev) {
            *nx = 2.0 * *nx - pv;
        }
        if norm(&next) > limit {
            return Err(Error::HullViolation { step: k + 1 });
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        phase *= step;
    }
    let global = C64::from_polar(1.0, -c * t);
    Ok(acc.into_iter().map(|v| v * global).collect())
}

/// Mass on the outer 5% of the window, relative to `scale`.
fn check_front(window: &LatticeWindow, x: &[C64], scale: f64) -> Result<()> {
    let mass = window.outer_mass(x, OUTER_FRACTION);
    if mass > FRONT_GATE * scale {
        Err(Error::FrontHitsBoundary { mass })
    } else {
        Ok(())
    }
}

/// `1 - (projector onto flat-band eigenspaces of h(p))`, acting on window
/// vectors through the discrete Fourier transform along the sites.
#[derive(Debug, Clone)]
pub struct PacProjector {
    sites: usize,
    block: usize,
    /// Per grid point: orthonormal basis of the flat eigenspace.
    flat: Vec<Vec<Vec<C64>>>,
}

impl PacProjector {
    pub fn new(sym: &MatrixSymbol, bands: &BandStructure, window: &LatticeWindow) -> Result<Self> {
        let mut flat_values: Vec<(f64, usize)> = Vec::new();
        for b in bands.branches.iter().filter(|b| b.flat) {
            let v = 0.5 * (b.interval.0 + b.interval.1);
            match flat_values.iter_mut().find(|(f, _)| (f - v).abs() <= 1e-10 * sym.scale().max(1.0)) {
                Some(e) => e.1 += 1,
                None => flat_values.push((v, 1)),
            }
        }
        let n = window.sites();
        let nb = sym.block_size();
        let tol = 1e-8 * sym.scale().max(1.0);
        let flat = (0..n)
            .map(|k| -> Result<Vec<Vec<C64>>> {
                if flat_values.is_empty() {
                    return Ok(Vec::new());
                }
                let p = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                // crossings with dispersive bands are resolved by the derivative
                let (vals, vecs, derivs) = resolved_eig(sym, p, tol)?;
                let mut out = Vec::new();
                for (f, count) in &flat_values {
                    let mut cand: Vec<usize> = (0..nb).filter(|i| (vals[*i] - f).abs() <= tol).collect();
                    cand.sort_by(|a, b| derivs[*a].abs().total_cmp(&derivs[*b].abs()));
                    out.extend(cand.into_iter().take(*count).map(|i| vecs.column(i).iter().copied().collect()));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PacProjector { sites: n, block: nb, flat })
    }

    pub fn is_identity(&self) -> bool {
        self.flat.iter().all(|f| f.is_empty())
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        if self.is_identity() {
            return x.to_vec();
        }
        let (n, nb) = (self.sites, self.block);
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(n);
        let fwd = planner.plan_fft_forward(n);
        // x_hat(p_k) = sum_m x_m e^{i p_k m}
        let mut comps: Vec<Vec<C64>> = (0..nb).map(|c| (0..n).map(|m| x[m * nb + c]).collect()).collect();
        for comp in comps.iter_mut() {
            inv.process(comp);
        }
        for k in 0..n {
            let v: Vec<C64> = (0..nb).map(|c| comps[c][k]).collect();
            let mut w = v.clone();
            for f in &self.flat[k] {
                let coef = dot(f, &v);
                for (wc, fc) in w.iter_mut().zip(f) {
                    *wc -= coef * fc;
                }
            }
            for c in 0..nb {
                comps[c][k] = w[c];
            }
        }
        for comp in comps.iter_mut() {
            fwd.process(comp);
        }
        let scale = 1.0 / n as f64;
        let mut out = vec![ZERO; n * nb];
        for m in 0..n {
            for c in 0..nb {
                out[m * nb + c] = comps[c][m] * scale;
            }
        }
        out
    }
}

/// `g(t) = |<N>^{-sigma} e^{-iH_0 t} phi(H_0) <N>^{-sigma}|` on a time grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PropagationDecay {
    pub sigma: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `log g` against `log t` over `[t_max / 10, t_max]`.
    pub slope: f64,
    pub residual: f64,
    pub filter_degree: usize,
    pub input_radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecayOptions {
    pub power_iterations: usize,
    pub power_tol: f64,
    pub filter_eps: f64,
    pub seed: u64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            power_iterations: 40,
            power_tol: 1e-4,
            filter_eps: 1e-8,
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// Inputs are restricted to sites `|n| <= L / 4`; with the weight
/// `<N>^{-sigma}` the maximizers live near the origin anyway, and the
/// ballistic front then stays clear of the outer 5% of the window.
pub fn propagation_decay(
    h0: &BandedBlockMatrix,
    phi: PlateauWindow,
    sigma: f64,
    times: &[f64],
    plan: &PropagatorPlan,
    opts: &DecayOptions,
) -> Result<PropagationDecay> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::precondition("time grid must be positive and nonempty"));
    }
    let window = *h0.window();
    let op = h0.compile();
    let filter = ChebyshevFilter::new(|x| phi.eval(x), plan.lo, plan.hi, None, opts.filter_eps)?;
    let radius = window.sites() / 8;
    let nb = window.block_size;
    let inner: Vec<bool> = (0..window.dim())
        .map(|i| window.position(i / nb).unsigned_abs() as usize <= radius)
        .collect();
    let restrict = |x: &mut [C64]| {
        for (v, keep) in x.iter_mut().zip(&inner) {
            if !keep {
                *v = ZERO;
            }
        }
    };
    let values = times
        .par_iter()
        .map(|&t| -> Result<f64> {
            let mut rng = StartVectors::new(opts.seed);
            let mut x = rng.vector(window.dim());
            restrict(&mut x);
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let mut g = 0.0;
            for _ in 0..opts.power_iterations {
                let y = filter.apply(&op, &weight_vector(&x, &window, sigma));
                let y = chebyshev_propagate(&op, &y, t, plan)?;
                check_front(&window, &y, 1.0)?;
                let y = weight_vector(&y, &window, sigma);
                let gy = norm(&y);
                // adjoint: W phi(H) e^{iHt} W
                let z = chebyshev_propagate(&op, &weight_vector(&y, &window, sigma), -t, plan)?;
                let mut z = weight_vector(&filter.apply(&op, &z), &window, sigma);
                restrict(&mut z);
                let nz = norm(&z);
                let done = (gy - g).abs() <= opts.power_tol * gy;
                g = gy;
                if nz == 0.0 || done {
                    break;
                }
                x = z.into_iter().map(|v| v / nz).collect();
            }
            Ok(g)
        })
        .collect::<Result<Vec<f64>>>()?;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let fit_pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&values)
        .filter(|(t, g)| **t >= t_max / 10.0 - 1e-12 && **g > 0.0)
        .map(|(t, g)| (t.ln(), g.ln()))
        .collect();
    let (slope, residual) = if fit_pts.len() >= 2 {
        let x: Vec<f64> = fit_pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = fit_pts.iter().map(|p| p.1).collect();
        let f = linear_fit(&x, &y).ok_or_else(|| Error::precondition("degenerate time grid"))?;
        (f.slope, f.residual_rms)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(PropagationDecay {
        sigma,
        times: times.to_vec(),
        values,
        slope,
        residual,
        filter_degree: filter.degree(),
        input_radius: radius,
    })
}

/// Direction of the wave-operator limit `T -> +-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct WaveOperatorResult {
    pub sign: Sign,
    pub times: Vec<f64>,
    pub input_norm: f64,
    pub pac_norm: f64,
    pub norms: Vec<f64>,
    /// `|Omega_{T_{k+1}} psi - Omega_{T_k} psi|`.
    pub cauchy_defects: Vec<f64>,
    pub isometry_defect: f64,
    pub intertwining_residual: f64,
    pub test_window: PlateauWindow,
    pub test_filter_tail: f64,
    #[serde(skip)]
    pub pac_input: Vec<C64>,
    #[serde(skip)]
    pub omega: Vec<C64>,
}

/// Test window for the intertwining check: a bump on the middle third of
/// the widest non-flat band.
pub fn intertwining_window(bands: &BandStructure) -> Result<PlateauWindow> {
    let (lo, hi) = bands
        .branches
        .iter()
        .filter(|b| !b.flat)
        .map(|b| b.interval)
        .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
        .ok_or_else(|| Error::precondition("no dispersive band"))?;
    let third = (hi - lo) / 3.0;
    Ok(PlateauWindow::inside(lo + third, hi - third, 0.25))
}

pub const INTERTWINING_DEGREE: usize = 200;

/// `Omega_T psi = e^{iHT} e^{-iH_0 T} P_ac psi` on the time grid.
#[allow(clippy::too_many_arguments)]
pub fn wave_operator(
    h: &BandedBlockMatrix,
    h0: &BandedBlockMatrix,
    pac: &PacProjector,
    psi: &[C64],
    sign: Sign,
    times: &[f64],
    test_window: PlateauWindow,
    plan: &PropagatorPlan,
) -> Result<WaveOperatorResult> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::precondition("time grid must be nonnegative and increasing"));
    }
    if h.dim() != h0.dim() || psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi.len(),
        });
    }
    let window = *h.window();
    let hc = h.compile();
    let h0c = h0.compile();
    let s = sign.factor();
    let pac_input = pac.apply(psi);
    let input_scale = norm(psi).max(1e-300);
    let omega_at = |x0: &[C64]| -> Result<Vec<Vec<C64>>> {
        // free evolution stepped along the grid, then pulled back by H
        let mut free = x0.to_vec();
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            free = chebyshev_propagate(&h0c, &free, s * (t - last), plan)?;
            check_front(&window, &free, input_scale)?;
            last = t;
            let back = chebyshev_propagate(&hc, &free, -s * t, plan)?;
            out.push(back);
        }
        Ok(out)
    };
    let omegas = omega_at(&pac_input)?;
    let norms: Vec<f64> = omegas.iter().map(|v| norm(v)).collect();
    let cauchy_defects: Vec<f64> = omegas
        .windows(2)
        .map(|w| norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let pac_norm = norm(&pac_input);
    let omega = omegas.last().cloned().unwrap_or_default();
    let isometry_defect = (norm(&omega) - pac_norm).abs();

    let f = ChebyshevFilter::new(|x| test_window.eval(x), plan.lo, plan.hi, Some(INTERTWINING_DEGREE), f64::INFINITY)?;
    let lhs = f.apply(&hc, &omega);
    let t_max = *times.last().expect("nonempty");
    let f0 = pac.apply(&f.apply(&h0c, psi));
    let free = chebyshev_propagate(&h0c, &f0, s * t_max, plan)?;
    check_front(&window, &free, input_scale)?;
    let rhs = chebyshev_propagate(&hc, &free, -s * t_max, plan)?;
    let intertwining_residual = norm(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(WaveOperatorResult {
        sign,
        times: times.to_vec(),
        input_norm: norm(psi),
        pac_norm,
        norms,
        cauchy_defects,
        isometry_defect,
        intertwining_residual,
        test_window,
        test_filter_tail: f.tail,
        pac_input,
        omega,
    })
}

pub const CAUCHY_GATE: f64 = 2e-2;
pub const COMPLETENESS_GATE: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Completeness {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Completeness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Completeness::Pass => "pass",
            Completeness::Fail => "fail",
            Completeness::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CompletenessReport {
    pub verdict: Completeness,
    /// `max |<Omega psi_a, Omega psi_b> - <P_ac psi_a, P_ac psi_b>|` over
    /// normalized inputs.
    pub gram_defect: f64,
    /// `max |<phi_b, Omega psi_k>| / |psi_k|` over certified bound states.
    pub bound_state_overlap: f64,
    pub worst_cauchy: f64,
    pub note: String,
}

/// Isometry of `Omega_{T_max}` on the inputs and orthogonality of its range
/// to the certified bound states of `H`.
pub fn completeness_check(results: &[WaveOperatorResult], bound_states: &[ValidatedEigenpair]) -> CompletenessReport {
    let mut worst_cauchy = 0.0f64;
    let mut gated = false;
    for r in results {
        if let (Some(first), Some(last)) = (r.cauchy_defects.first(), r.cauchy_defects.last()) {
            let scale = r.input_norm.max(1e-300);
            worst_cauchy = worst_cauchy.max(last / scale);
            if last / scale > CAUCHY_GATE || last > first {
                gated = true;
            }
        }
    }
    let mut gram_defect = 0.0f64;
    for a in results {
        for b in results {
            let scale = a.input_norm * b.input_norm;
            let d = (dot(&a.omega, &b.omega) - dot(&a.pac_input, &b.pac_input)).norm() / scale.max(1e-300);
            gram_defect = gram_defect.max(d);
        }
    }
    let mut bound_state_overlap = 0.0f64;
    for e in bound_states {
        let ne = norm(&e.vector).max(1e-300);
        for r in results {
            let o = dot(&e.vector, &r.omega).norm() / (ne * r.input_norm.max(1e-300));
            bound_state_overlap = bound_state_overlap.max(o);
        }
    }
    let (verdict, note) = if gated {
        (Completeness::Inconclusive, "Cauchy defect not small and decreasing; increase T_max".to_string())
    } else if gram_defect <= COMPLETENESS_GATE && bound_state_overlap <= COMPLETENESS_GATE {
        (Completeness::Pass, String::new())
    } else {
        (Completeness::Fail, format!("gram {gram_defect:.3e}, overlap {bound_state_overlap:.3e}"))
    };
    CompletenessReport {
        verdict,
        gram_defect,
        bound_state_overlap,
        worst_cauchy,
        note,
    }
}

/// `phi(H_0) e_n` for `n` spread over the inner part of the window:
/// finitely supported states with energies inside `phi`.
pub fn energy_filtered_states(
    h0: &BandedBlockMatrix,
    phi: PlateauWindow,
    positions: &[i64],
    degree: usize,
    plan: &PropagatorPlan,
) -> Result<Vec<Vec<C64>>> {
    let window = *h0.window();
    let op: CompiledBand = h0.compile();
    let f = ChebyshevFilter::new(|x| phi.eval(x), plan.lo, plan.hi, Some(degree), f64::INFINITY)?;
    positions
        .iter()
        .map(|&n| {
            let e = window
                .unit(n, 0)
                .ok_or_else(|| Error::precondition(format!("site {n} outside the window")))?;
            Ok(f.apply_local(&op, &e))
        })
        .collect()
}

/// Energy drift `|<psi_t, H psi_t> - <psi, H psi>|`.
pub fn energy_drift<A: LinearOperator + ?Sized>(h: &A, psi: &[C64], psi_t: &[C64]) -> f64 {
    let e0 = dot(psi, &h.apply(psi)).re;
    let e1 = dot(psi_t, &h.apply(psi_t)).re;
    (e1 - e0).abs()
}

/// `||P^2 x - P x||` for a projector applied twice.
pub fn idempotence_defect(p: &PacProjector, x: &[C64]) -> f64 {
    let px = p.apply(x);
    let ppx = p.apply(&px);
    norm(&ppx.iter().zip(&px).map(|(a, b)| a - b).collect::<Vec<_>>())
}

/// Dense matrix of the projector, for small windows.
pub fn projector_matrix(p: &PacProjector) -> CMat {
    let n = p.sites * p.block;
    let mut m = CMat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![ZERO; n];
        e[j] = C64::new(1.0, 0.0);
        let c = p.apply(&e);
        for i in 0..n {
            m[(i, j)] = c[i];
        }
    }
    m
}
