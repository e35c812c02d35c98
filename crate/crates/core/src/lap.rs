//! Weighted resolvent norms near the real axis.

use crate::eig::{gap_eigenvalues, EigOptions};
use crate::lattice::{weight_vector, BandedBlockMatrix, CompiledBand, LatticeWindow, LinearOperator};
use crate::linalg::{norm, BandLu, StartVectors};
use crate::model::LatticeModel;
use crate::special::linear_fit;
use crate::symbol::{compute_bands, essential_spectrum, DEFAULT_GRID};
use crate::{Error, Result, C64};
use rayon::prelude::*;

/// Factorizations with a larger condition estimate are treated as singular.
pub const MAX_CONDITION: f64 = 1e14;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const POWER_ITERATIONS: usize = 30;
pub const POWER_TOL: f64 = 1e-4;

/// `(H - z)^{-1}` through one banded LU.
#[derive(Debug, Clone)]
pub struct Resolvent {
    z: C64,
    lu: BandLu,
    op: CompiledBand,
    pub condition: f64,
}

impl Resolvent {
    pub fn new(h: &BandedBlockMatrix, z: C64) -> Result<Self> {
        let lu = BandLu::factor(&h.to_scalar_band(), z)?;
        let condition = lu.condition_estimate();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::NearEigenvalue { shift: z.re, condition });
        }
        Ok(Resolvent {
            z,
            lu,
            op: h.compile(),
            condition,
        })
    }

    pub fn shift(&self) -> C64 {
        self.z
    }

    /// Solve `(H - z) x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.lu.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lu.dim(),
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.lu.solve(&mut x);
        let mut r = self.residual(&x, b);
        self.lu.solve(&mut r);
        for (xv, rv) in x.iter_mut().zip(&r) {
            *xv += rv;
        }
        let res = norm(&self.residual(&x, b));
        let nb = norm(b);
        if res > RESIDUAL_TOL * nb {
            return Err(Error::NearEigenvalue {
                shift: self.z.re,
                condition: self.condition.max(res / nb.max(1e-300) / f64::EPSILON),
            });
        }
        Ok(x)
    }

    /// `b - (H - z) x`.
    fn residual(&self, x: &[C64], b: &[C64]) -> Vec<C64> {
        let hx = self.op.apply(x);
        b.iter().zip(hx.iter().zip(x)).map(|(bv, (h, xv))| bv - (h - self.z * xv)).collect()
    }
}

pub fn resolvent_solve(h: &BandedBlockMatrix, z: C64, b: &[C64]) -> Result<Vec<C64>> {
    Resolvent::new(h, z)?.solve(b)
}

/// Largest singular value of `<N>^{-s} (H - x - i mu)^{-1} <N>^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WeightedNorm {
    pub value: f64,
    pub condition: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn weighted_resolvent_norm(h: &BandedBlockMatrix, x: f64, mu: f64, s: f64) -> Result<f64> {
    Ok(weighted_resolvent_norm_detailed(h, x, mu, s)?.value)
}

/// Power iteration on `B^* B`, `B = W R(z) W`, with `B^* = W R(conj z) W`.
pub fn weighted_resolvent_norm_detailed(h: &BandedBlockMatrix, x: f64, mu: f64, s: f64) -> Result<WeightedNorm> {
    if mu == 0.0 || !mu.is_finite() {
        return Err(Error::precondition("the imaginary part of the spectral parameter must be nonzero"));
    }
    let w = *h.window();
    let z = C64::new(x, mu);
    let r = Resolvent::new(h, z)?;
    let ra = Resolvent::new(h, z.conj())?;
    let apply = |res: &Resolvent, v: &[C64]| -> Result<Vec<C64>> {
        let y = res.solve(&weight_vector(v, &w, s))?;
        Ok(weight_vector(&y, &w, s))
    };
    // a real start vector keeps norms at +mu and -mu identical for real H
    let mut v: Vec<C64> = StartVectors::new(crate::DEFAULT_SEED)
        .vector(w.dim())
        .iter()
        .map(|c| C64::new(c.re, 0.0))
        .collect();
    let mut sigma = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=POWER_ITERATIONS {
        iterations = it;
        let u = apply(&r, &v)?;
        let next = norm(&u);
        let back = apply(&ra, &u)?;
        let nb = norm(&back);
        if nb == 0.0 {
            sigma = next;
            converged = true;
            break;
        }
        v = back.into_iter().map(|c| c / nb).collect();
        let done = (next - sigma).abs() <= POWER_TOL * next;
        sigma = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(WeightedNorm {
        value: sigma,
        condition: r.condition,
        iterations,
        converged,
    })
}

/// Boundedness verdict of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Bounded,
    Growing,
    NearEigenvalue,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Growing => "growing",
            Verdict::NearEigenvalue => "near-eigenvalue",
        })
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeRow {
    pub mu: f64,
    pub norm: f64,
    pub norm_doubled: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResolventProbe {
    pub x: f64,
    pub s: f64,
    pub half_length: usize,
    /// Smallest admissible `mu` for the window, `max(1e-4, 20 / sites)`.
    pub mu_min: f64,
    pub rows: Vec<ProbeRow>,
    /// Growth of the norm over the last `mu`-decade.
    pub decade_ratio: f64,
    /// Slope of `log norm` against `log mu` over the last decade.
    pub slope: f64,
    /// `max |norm(L) - norm(2L)| / norm(2L)`.
    pub window_agreement: f64,
    pub nearby_eigenvalue: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LapOptions {
    pub ratio_gate: f64,
    pub agreement_gate: f64,
    pub eig: EigOptions,
}

impl Default for LapOptions {
    fn default() -> Self {
        LapOptions {
            ratio_gate: 2.0,
            agreement_gate: 0.1,
            eig: EigOptions::default(),
        }
    }
}

/// `10^{-1 - k/4}` for `k = 0..=12`.
pub fn default_mu_grid() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powf(-1.0 - k as f64 / 4.0)).collect()
}

/// Below about twenty level spacings the finite section looks discrete.
pub fn mu_floor(window: &LatticeWindow) -> f64 {
    (20.0 / window.sites() as f64).max(1e-4)
}

pub fn lap_sweep(
    model: &LatticeModel,
    x: f64,
    s: f64,
    mu_grid: Option<&[f64]>,
    half_length: usize,
    opts: &LapOptions,
) -> Result<ResolventProbe> {
    if !(s > 0.5) {
        return Err(Error::precondition(format!("weight exponent s = {s} must exceed 1/2")));
    }
    let h1 = model.assemble(half_length)?;
    let h2 = model.assemble(2 * half_length)?;
    let mu_min = mu_floor(h1.window());
    let mut mus: Vec<f64> = mu_grid
        .map(|g| g.to_vec())
        .unwrap_or_else(default_mu_grid)
        .into_iter()
        .filter(|m| *m > 0.0 && *m >= mu_min * (1.0 - 1e-12))
        .collect();
    mus.sort_by(|a, b| b.total_cmp(a));
    mus.dedup();
    if mus.len() < 2 {
        return Err(Error::precondition(format!(
            "fewer than two admissible mu values above the floor {mu_min:e}"
        )));
    }
    let rows: Vec<ProbeRow> = mus
        .par_iter()
        .map(|&mu| {
            let a = weighted_resolvent_norm_detailed(&h1, x, mu, s)?;
            let b = weighted_resolvent_norm_detailed(&h2, x, mu, s)?;
            Ok(ProbeRow {
                mu,
                norm: a.value,
                norm_doubled: b.value,
                condition: a.condition,
            })
        })
        .collect::<Result<_>>()?;

    let smallest = *mus.last().unwrap();
    let last: Vec<&ProbeRow> = rows.iter().filter(|r| r.mu <= 10.0 * smallest * (1.0 + 1e-9)).collect();
    let lx: Vec<f64> = last.iter().map(|r| r.mu.log10()).collect();
    let ly: Vec<f64> = last.iter().map(|r| r.norm.log10()).collect();
    let slope = linear_fit(&lx, &ly).map_or(0.0, |f| f.slope);
    let span = lx[0] - lx[lx.len() - 1];
    let decade_ratio = if span >= 1.0 - 1e-9 {
        let max = last.iter().map(|r| r.norm).fold(0.0, f64::max);
        let min = last.iter().map(|r| r.norm).fold(f64::INFINITY, f64::min);
        max / min
    } else {
        10f64.powf(-slope).max(1.0)
    };
    let window_agreement = rows
        .iter()
        .map(|r| (r.norm - r.norm_doubled).abs() / r.norm_doubled)
        .fold(0.0, f64::max);

    let nearby_eigenvalue = nearby_gap_eigenvalue(model, x, half_length, 10.0 * mu_min, &opts.eig)?;
    let verdict = if nearby_eigenvalue.is_some() {
        Verdict::NearEigenvalue
    } else if decade_ratio <= opts.ratio_gate && window_agreement <= opts.agreement_gate {
        Verdict::Bounded
    } else {
        Verdict::Growing
    };
    Ok(ResolventProbe {
        x,
        s,
        half_length,
        mu_min,
        rows,
        decade_ratio,
        slope,
        window_agreement,
        nearby_eigenvalue,
        verdict,
    })
}

/// A certified eigenvalue within `radius` of `x`, when `x` lies off the
/// essential spectrum.
fn nearby_gap_eigenvalue(model: &LatticeModel, x: f64, half_length: usize, radius: f64, opts: &EigOptions) -> Result<Option<f64>> {
    let k = DEFAULT_GRID.max((4 * model.symbol.cutoff() + 4).next_power_of_two());
    let bands = compute_bands(&model.symbol, k)?;
    let ess = essential_spectrum(&bands);
    if ess.iter().any(|(a, b)| *a <= x && x <= *b) {
        return Ok(None);
    }
    let (glo, ghi) = model.assemble(half_length)?.gershgorin();
    let lo = ess.iter().map(|r| r.1).filter(|b| *b < x).fold(glo - 1.0, f64::max);
    let hi = ess.iter().map(|r| r.0).filter(|a| *a > x).fold(ghi + 1.0, f64::min);
    let pad = 1e-6 * (hi - lo);
    let found = gap_eigenvalues(model, (lo + pad, hi - pad), half_length, opts)?;
    Ok(found
        .iter()
        .map(|p| p.value)
        .filter(|v| (v - x).abs() <= radius)
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs())))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HolderFit {
    pub slope: f64,
    pub residual: f64,
    pub mu: f64,
    pub deltas: Vec<f64>,
    pub differences: Vec<f64>,
    pub center_value: f64,
    pub inconclusive: bool,
    pub reason: Option<String>,
}

/// `width * 2^{-k}` for `k = 3..=8`.
pub fn default_holder_deltas(width: f64) -> Vec<f64> {
    (3..=8).map(|k| width * 0.5f64.powi(k)).collect()
}

/// Fit `log |g(x + d) - g(x)|` against `log d` where `g` is the weighted
/// resolvent norm at fixed `mu`. The larger of the two one-sided
/// differences is used.
pub fn holder_fit(h: &BandedBlockMatrix, x_center: f64, s: f64, deltas: &[f64], mu: f64) -> Result<HolderFit> {
    if deltas.len() < 3 {
        return Err(Error::precondition("the Hölder fit needs at least three offsets"));
    }
    let mut points = vec![x_center];
    for d in deltas {
        points.push(x_center + d);
        points.push(x_center - d);
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|&x| weighted_resolvent_norm(h, x, mu, s))
        .collect::<Result<_>>()?;
    let g0 = values[0];
    let differences: Vec<f64> = (0..deltas.len())
        .map(|i| (values[1 + 2 * i] - g0).abs().max((values[2 + 2 * i] - g0).abs()))
        .collect();
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = differences.iter().map(|d| d.max(1e-300).ln()).collect();
    let fit = linear_fit(&lx, &ly).ok_or_else(|| Error::precondition("offsets must be distinct"))?;
    let d_min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|a, b| deltas[*a].total_cmp(&deltas[*b]));
    let monotone = order.windows(2).all(|w| differences[w[0]] <= differences[w[1]]);
    let reason = if differences.iter().any(|d| *d < POWER_TOL * g0) {
        Some("differences below the power-iteration noise floor".to_string())
    } else if !monotone {
        Some("differences are not monotone in the offset".to_string())
    } else if mu >= d_min {
        Some(format!("mu = {mu:e} is not small against the smallest offset {d_min:e}"))
    } else {
        None
    };
    Ok(HolderFit {
        slope: fit.slope,
        residual: fit.residual_rms,
        mu,
        deltas: deltas.to_vec(),
        differences,
        center_value: g0,
        inconclusive: reason.is_some(),
        reason,
    })
}
