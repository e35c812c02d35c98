//! Conjugate operator on a Fourier grid and the compressed Mourre estimate.
//!
//! On band `j` the conjugate operator is the first-order differential
//! operator `a_j = i F_j d/dp + (i/2) F_j'` with `F_j lambda_j' = zeta(lambda_j)`.
//! On the grid it is realized in the symmetric form
//! `(i/2) chi (F D + D F) chi`, which is Hermitian as a matrix, where `D` is
//! spectral differentiation and `chi` is a cutoff equal to one on the support
//! of `F`. The lattice operator is pulled back band by band through the
//! eigenvector frames.

use crate::eig::ChebyshevFilter;
use crate::lattice::{weight_vector, BandedBlockMatrix, LatticeWindow, LinearOperator, PlateauWindow, WindowKind};
use crate::linalg::fourier::GridFft;
use crate::linalg::{dot, faer_eigh, faer_eigvalsh, norm, StartVectors};
use crate::model::LatticeModel;
use crate::symbol::{compute_bands, compute_critical_set, BandStructure, CriticalSet};
use crate::{Error, Result, C64};
use faer::Mat;
use rayon::prelude::*;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// `|lambda'|` below this fraction of the symbol scale counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-6;

/// The window `zeta`: one on `delta`, supported within half the distance
/// from `delta` to the critical set.
pub fn build_window(delta: (f64, f64), kappa: &CriticalSet) -> Result<PlateauWindow> {
    let (lo, hi) = delta;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::precondition(format!("energy interval [{lo}, {hi}] is empty")));
    }
    let dist = match kappa.distance_to_interval(lo, hi) {
        Some((d, value)) if d <= 0.0 => return Err(Error::TouchesCriticalSet { value }),
        Some((d, _)) => d,
        None => hi - lo,
    };
    Ok(PlateauWindow::around(lo, hi, 0.5 * dist))
}

/// `F_j = zeta(lambda_j) lambda_j' / |lambda_j'|^2` on the band grid.
pub fn build_f(bands: &BandStructure, j: usize, zeta: &PlateauWindow) -> Result<Vec<f64>> {
    let br = bands
        .branches
        .get(j)
        .ok_or_else(|| Error::precondition(format!("band index {j} out of range")))?;
    let tol = STATIONARY_TOL * bands.scale.max(1e-300);
    br.values
        .iter()
        .zip(&br.derivs)
        .enumerate()
        .map(|(k, (&l, &d))| {
            let z = zeta.eval(l);
            if z == 0.0 {
                Ok(0.0)
            } else if d.abs() < tol {
                Err(Error::StationaryInWindow { branch: j, p: bands.grid[k] })
            } else {
                Ok(z / d)
            }
        })
        .collect()
}

/// Grid data of one band.
#[derive(Debug, Clone)]
pub struct BandConjugate {
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    pub f: Vec<f64>,
    pub chi: Vec<f64>,
    frames: Vec<Vec<C64>>,
    pub active: bool,
}

/// The conjugate operator `A = U^{-1} (sum_j a_j) U` on a `K`-point grid.
#[derive(Debug, Clone)]
pub struct ConjugateOperatorGrid {
    fft: GridFft,
    pub delta: (f64, f64),
    pub zeta: PlateauWindow,
    pub cutoff: PlateauWindow,
    pub bands: Vec<BandConjugate>,
    block_size: usize,
    /// Measured `|<x, a y> - <a x, y>| / (|a| |x| |y|)` over random probes.
    pub hermiticity_defect: f64,
}

pub fn build_conjugate(bands: &BandStructure, kappa: &CriticalSet, delta: (f64, f64)) -> Result<ConjugateOperatorGrid> {
    let k = bands.grid_size();
    if !k.is_power_of_two() {
        return Err(Error::precondition(format!("grid size {k} is not a power of two")));
    }
    let zeta = build_window(delta, kappa)?;
    let m = zeta.inner.0 - zeta.outer.0;
    // chi = 1 on supp zeta and vanishes just short of the critical set
    let cutoff = PlateauWindow::new((zeta.outer.0 - 0.9 * m, zeta.outer.1 + 0.9 * m), zeta.outer);
    let out: Vec<BandConjugate> = (0..bands.band_count())
        .into_par_iter()
        .map(|j| {
            let br = &bands.branches[j];
            let f = build_f(bands, j, &zeta)?;
            let chi: Vec<f64> = br.values.iter().map(|v| cutoff.eval(*v)).collect();
            let active = f.iter().any(|v| *v != 0.0);
            Ok(BandConjugate {
                values: br.values.clone(),
                derivs: br.derivs.clone(),
                f,
                chi,
                frames: br.frames.clone(),
                active,
            })
        })
        .collect::<Result<_>>()?;
    let block_size = bands.branches.first().map_or(1, |b| b.frames[0].len());
    let mut grid = ConjugateOperatorGrid {
        fft: GridFft::new(k),
        delta,
        zeta,
        cutoff,
        bands: out,
        block_size,
        hermiticity_defect: 0.0,
    };
    grid.hermiticity_defect = grid.measure_hermiticity(4);
    Ok(grid)
}

impl ConjugateOperatorGrid {
    pub fn grid_size(&self) -> usize {
        self.fft.len()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn is_zero(&self) -> bool {
        self.bands.iter().all(|b| !b.active)
    }

    /// Lattice window carried by the grid: positions `-K/2 .. K/2 - 1`.
    pub fn window(&self) -> LatticeWindow {
        LatticeWindow::two_sided(self.grid_size() / 2, self.block_size)
    }

    /// `a_j g` for grid samples `g`.
    pub fn apply_band(&self, j: usize, g: &[C64]) -> Vec<C64> {
        let b = &self.bands[j];
        if !b.active {
            return vec![ZERO; g.len()];
        }
        let u: Vec<C64> = g.iter().zip(&b.chi).map(|(v, c)| v * c).collect();
        let du = self.fft.derivative(&u);
        let fu: Vec<C64> = u.iter().zip(&b.f).map(|(v, f)| v * f).collect();
        let dfu = self.fft.derivative(&fu);
        (0..g.len())
            .map(|k| (du[k] * b.f[k] + dfu[k]) * (I * 0.5 * b.chi[k]))
            .collect()
    }

    /// `sup |F_j lambda_j' - zeta(lambda_j)|` over bands and grid points.
    pub fn identity_defect(&self) -> f64 {
        self.bands
            .iter()
            .flat_map(|b| {
                b.values
                    .iter()
                    .zip(&b.derivs)
                    .zip(&b.f)
                    .map(|((l, d), f)| (f * d - self.zeta.eval(*l)).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `max_m |[lambda_j, i a_j] e_m - zeta(lambda_j) e_m| / |e_m|` over Fourier
    /// modes `|m| <= max_mode`, the resolved part of the grid.
    pub fn commutator_defect(&self, j: usize, max_mode: usize) -> f64 {
        let k = self.grid_size();
        let b = &self.bands[j];
        let modes: Vec<i64> = (-(max_mode as i64)..=max_mode as i64).collect();
        modes
            .par_iter()
            .map(|&m| {
                let u: Vec<C64> = (0..k)
                    .map(|q| C64::from_polar(1.0, m as f64 * self.fft.point(q)))
                    .collect();
                let au = self.apply_band(j, &u);
                let lu: Vec<C64> = u.iter().zip(&b.values).map(|(v, l)| v * l).collect();
                let alu = self.apply_band(j, &lu);
                let mut err = 0.0;
                for q in 0..k {
                    let c = I * (au[q] * b.values[q] - alu[q]);
                    err += (c - u[q] * self.zeta.eval(b.values[q])).norm_sqr();
                }
                (err / k as f64).sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    fn measure_hermiticity(&self, probes: usize) -> f64 {
        let k = self.grid_size();
        let mut rng = StartVectors::new(0xA11CE);
        let mut worst = 0.0f64;
        for j in 0..self.bands.len() {
            if !self.bands[j].active {
                continue;
            }
            let xs: Vec<Vec<C64>> = (0..probes).map(|_| rng.vector(k)).collect();
            let axs: Vec<Vec<C64>> = xs.iter().map(|x| self.apply_band(j, x)).collect();
            let scale = axs.iter().map(|v| norm(v)).fold(0.0, f64::max).max(1e-300);
            for a in 0..probes {
                for b in 0..probes {
                    let d = (dot(&xs[a], &axs[b]) - dot(&axs[a], &xs[b])).norm();
                    worst = worst.max(d / scale);
                }
            }
        }
        worst
    }

    /// `A psi` for `psi` on lattice positions `first .. first + sites`;
    /// the result lives on the grid window.
    pub fn apply_lattice(&self, first: i64, psi: &[C64]) -> Vec<C64> {
        let k = self.grid_size();
        let nb = self.block_size;
        let sites = psi.len() / nb;
        let comps: Vec<Vec<C64>> = (0..nb)
            .map(|c| {
                let col: Vec<C64> = (0..sites).map(|s| psi[s * nb + c]).collect();
                self.fft.lattice_to_grid(first, &col)
            })
            .collect();
        let mut acc = vec![vec![ZERO; k]; nb];
        for (j, b) in self.bands.iter().enumerate() {
            if !b.active {
                continue;
            }
            let fj: Vec<C64> = (0..k)
                .map(|q| (0..nb).map(|c| b.frames[q][c].conj() * comps[c][q]).sum())
                .collect();
            let gj = self.apply_band(j, &fj);
            for q in 0..k {
                for c in 0..nb {
                    acc[c][q] += gj[q] * b.frames[q][c];
                }
            }
        }
        let half = (k / 2) as i64;
        let back: Vec<Vec<C64>> = acc.iter().map(|f| self.fft.grid_to_lattice(-half, k, f)).collect();
        let mut out = vec![ZERO; k * nb];
        for s in 0..k {
            for c in 0..nb {
                out[s * nb + c] = back[c][s];
            }
        }
        out
    }

    /// Compression of `A` to a two-sided window inside the grid window.
    pub fn apply_window(&self, window: &LatticeWindow, x: &[C64]) -> Result<Vec<C64>> {
        let outer = self.window();
        let offset = outer
            .site(window.first())
            .filter(|_| window.kind == WindowKind::TwoSided && window.sites() <= outer.sites())
            .ok_or_else(|| Error::precondition("window exceeds the conjugate-operator grid"))?;
        if x.len() != window.dim() {
            return Err(Error::DimensionMismatch { expected: window.dim(), got: x.len() });
        }
        let full = self.apply_lattice(window.first(), x);
        let nb = self.block_size;
        Ok(full[offset * nb..(offset + window.sites()) * nb].to_vec())
    }
}

/// Estimate `|<N>^{-m} A^m|` with `A` compressed to the two-sided window of
/// half-length `half_length`, by power iteration.
pub fn weight_regularity_check(grid: &ConjugateOperatorGrid, half_length: usize, m: u32) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    if grid.is_zero() {
        return Ok(0.0);
    }
    let w = LatticeWindow::two_sided(half_length, grid.block_size());
    let s = m as f64;
    let forward = |x: &[C64]| -> Result<Vec<C64>> {
        let mut y = x.to_vec();
        for _ in 0..m {
            y = grid.apply_window(&w, &y)?;
        }
        Ok(weight_vector(&y, &w, s))
    };
    let adjoint = |x: &[C64]| -> Result<Vec<C64>> {
        let mut y = weight_vector(x, &w, s);
        for _ in 0..m {
            y = grid.apply_window(&w, &y)?;
        }
        Ok(y)
    };
    let mut x = StartVectors::new(crate::DEFAULT_SEED).vector(w.dim());
    let mut est = 0.0;
    for _ in 0..200 {
        let y = adjoint(&forward(&x)?)?;
        let lam = norm(&y);
        if lam == 0.0 {
            return Ok(0.0);
        }
        x = y.into_iter().map(|v| v / lam).collect();
        let prev = est;
        est = lam.sqrt();
        if (est - prev).abs() <= 1e-6 * est {
            break;
        }
    }
    Ok(est)
}

/// Tunables of the compressed Mourre check.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MourreOptions {
    pub degree: usize,
    /// Shoulder width of the energy filter as a fraction of `|delta|`.
    pub shoulder: f64,
    /// Eigenvalues below `1 - defect_delta` count toward the defect rank.
    pub defect_delta: f64,
    /// Filtered directions with singular value below this are dropped.
    pub keep: f64,
    /// Uniform error allowed for the degree-`degree` filter.
    pub filter_eps: f64,
}

impl Default for MourreOptions {
    fn default() -> Self {
        MourreOptions {
            degree: 200,
            shoulder: 0.1,
            defect_delta: 0.1,
            keep: 0.1,
            filter_eps: 1e-2,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MourreReport {
    pub delta: (f64, f64),
    pub lower_bound: f64,
    /// Smallest eigenvalue once the defect directions are removed.
    pub bulk_lower_bound: Option<f64>,
    pub upper_bound: f64,
    pub defect_rank: usize,
    pub subspace_dim: usize,
    pub degree: usize,
    pub filter_tail: f64,
    pub seed_half_length: usize,
    pub grid_size: usize,
    /// Largest outer-window mass of `A q` relative to `|A q|`.
    pub grid_leak: f64,
}

/// Grid size used for seeds on `[-L, L)` with a degree-`degree` filter,
/// band half-width `bandwidth` and a dense patch within `|n| <= patch_radius`.
pub fn grid_size_for(seed_half_length: usize, degree: usize, bandwidth: usize, patch_radius: usize) -> usize {
    let r = filtered_half_length(seed_half_length, degree, bandwidth, patch_radius);
    ((8 * r).div_ceil(3)).next_power_of_two().max(2048)
}

/// Once the support of a filtered seed covers the patch it only grows by
/// the bandwidth per step.
fn filtered_half_length(seed_half_length: usize, degree: usize, bandwidth: usize, patch_radius: usize) -> usize {
    seed_half_length.max(patch_radius + 1) + degree * bandwidth.max(1) + 8
}

/// Smallest eigenvalue and defect rank of `P [H, iA] P` on the range of the
/// energy filter `P = phi_delta(H)` applied to unit vectors on `[-L, L)`.
///
/// `h` must live on the grid window of `grid`.
pub fn mourre_estimate_check(
    h: &BandedBlockMatrix,
    grid: &ConjugateOperatorGrid,
    delta: (f64, f64),
    seed_half_length: usize,
    opts: &MourreOptions,
) -> Result<MourreReport> {
    let gw = grid.window();
    if *h.window() != gw {
        return Err(Error::precondition(
            "matrix window differs from the conjugate-operator grid window",
        ));
    }
    let k = grid.grid_size();
    let nb = grid.block_size();
    let r = filtered_half_length(
        seed_half_length,
        opts.degree,
        h.bandwidth(),
        h.patch_radius().unwrap_or(0),
    );
    let margin = (k / 8).max(64);
    if r + margin > k / 2 {
        return Err(Error::WindowTooSmall {
            half_length: k / 2,
            required: r + margin,
        });
    }
    let hr = h.restrict(r)?;
    let (glo, ghi) = hr.gershgorin();
    let pad = 1e-3 * (ghi - glo).max(1e-12);
    let phi = PlateauWindow::inside(delta.0, delta.1, opts.shoulder);
    let filter = ChebyshevFilter::new(|x| phi.eval(x), glo - pad, ghi + pad, Some(opts.degree), opts.filter_eps)?;

    let rw = *hr.window();
    let hc = hr.compile();
    let n_r = rw.dim();
    let seeds: Vec<(i64, usize)> = (-(seed_half_length as i64)..seed_half_length as i64)
        .flat_map(|n| (0..nb).map(move |c| (n, c)))
        .collect();
    let cols: Vec<Vec<C64>> = seeds
        .par_iter()
        .map(|&(n, c)| filter.apply_local(&hc, &rw.unit(n, c).expect("seed inside window")))
        .collect();
    let y = Mat::<C64>::from_fn(n_r, cols.len(), |i, j| cols[j][i]);
    drop(cols);
    let g = y.adjoint() * &y;
    let (s, v) = faer_eigh(&g)?;
    let kept: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= opts.keep * opts.keep).collect();
    if kept.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let vk = Mat::<C64>::from_fn(v.nrows(), kept.len(), |i, j| v[(i, kept[j])] * (1.0 / s[kept[j]].sqrt()));
    let q = &y * &vk;
    drop(y);

    // Z = i [H, A] Q on the grid window, restricted back to the filter window
    let offset = gw.site(rw.first()).expect("filter window inside grid window");
    let kq = q.ncols();
    let hk = h.compile();
    let results: Vec<(Vec<C64>, f64)> = (0..kq)
        .into_par_iter()
        .map(|col| {
            let mut full = vec![ZERO; gw.dim()];
            for i in 0..n_r {
                full[offset * nb + i] = q[(i, col)];
            }
            let aq = grid.apply_lattice(gw.first(), &full);
            let leak = gw.outer_mass(&aq, 0.05) / norm(&aq).max(1e-300);
            let haq = hk.apply(&aq);
            let hq = hk.apply(&full);
            let ahq = grid.apply_lattice(gw.first(), &hq);
            let z: Vec<C64> = (0..n_r)
                .map(|i| I * (haq[offset * nb + i] - ahq[offset * nb + i]))
                .collect();
            (z, leak)
        })
        .collect();
    let grid_leak = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let z = Mat::<C64>::from_fn(n_r, kq, |i, j| results[j].0[i]);
    drop(results);
    let c = q.adjoint() * &z;
    let ch = Mat::<C64>::from_fn(kq, kq, |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5);
    let eigs = faer_eigvalsh(&ch)?;
    let threshold = 1.0 - opts.defect_delta;
    let defect_rank = eigs.iter().filter(|e| **e < threshold).count();
    Ok(MourreReport {
        delta,
        lower_bound: eigs[0],
        bulk_lower_bound: eigs.get(defect_rank).copied(),
        upper_bound: *eigs.last().unwrap(),
        defect_rank,
        subspace_dim: kq,
        degree: opts.degree,
        filter_tail: filter.tail,
        seed_half_length,
        grid_size: k,
        grid_leak,
    })
}

/// Reports at seed half-lengths `L` and `2L` with the defect-rank stability
/// verdict (`|rank(2L) - rank(L)| <= 2`).
#[derive(Debug, Clone, serde::Serialize)]
pub struct MourreStability {
    pub base: MourreReport,
    pub doubled: MourreReport,
    pub stable: bool,
}

/// Mourre check of a two-sided model at one seed window.
pub fn mourre_check(model: &LatticeModel, delta: (f64, f64), seed_half_length: usize, opts: &MourreOptions) -> Result<MourreReport> {
    if model.kind != WindowKind::TwoSided {
        return Err(Error::precondition(
            "the conjugate operator is built on the two-sided lattice",
        ));
    }
    let band = model.symbol.cutoff().max(1);
    let mut radius = 0;
    let (k, h) = loop {
        let k = grid_size_for(seed_half_length, opts.degree, band, radius);
        let h = model.assemble(k / 2)?;
        match h.patch_radius() {
            Some(p) if p >= k / 2 - 1 => {
                return Err(Error::precondition(
                    "perturbation fills the whole window; the commutator check needs finite or exponential support",
                ))
            }
            Some(p) if p > radius => radius = p,
            _ => break (k, h),
        }
    };
    let bands = compute_bands(&model.symbol, k)?;
    let kappa = compute_critical_set(&model.symbol, &bands)?;
    let grid = build_conjugate(&bands, &kappa, delta)?;
    mourre_estimate_check(&h, &grid, delta, seed_half_length, opts)
}

pub fn mourre_stability(
    model: &LatticeModel,
    delta: (f64, f64),
    seed_half_length: usize,
    opts: &MourreOptions,
) -> Result<MourreStability> {
    let base = mourre_check(model, delta, seed_half_length, opts)?;
    let doubled = mourre_check(model, delta, 2 * seed_half_length, opts)?;
    let stable = base.defect_rank.abs_diff(doubled.defect_rank) <= 2;
    Ok(MourreStability { base, doubled, stable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::catalog;

    fn cos_grid(k: usize, delta: (f64, f64)) -> Result<ConjugateOperatorGrid> {
        let sym = catalog::scalar_cos();
        let bands = compute_bands(&sym, k)?;
        let kappa = compute_critical_set(&sym, &bands)?;
        build_conjugate(&bands, &kappa, delta)
    }

    #[test]
    fn window_margins() {
        let sym = catalog::scalar_cos();
        let bands = compute_bands(&sym, 256).unwrap();
        let kappa = compute_critical_set(&sym, &bands).unwrap();
        let z = build_window((-0.5, 0.5), &kappa).unwrap();
        assert!(z.outer.0 >= -0.75 - 1e-12 && z.outer.1 <= 0.75 + 1e-12);
        assert_eq!(z.eval(0.5), 1.0);
        assert!(matches!(
            build_window((0.9, 1.1), &kappa),
            Err(Error::TouchesCriticalSet { .. })
        ));
    }

    #[test]
    fn f_matches_formula() {
        let sym = catalog::scalar_cos();
        let bands = compute_bands(&sym, 512).unwrap();
        let kappa = compute_critical_set(&sym, &bands).unwrap();
        let z = build_window((-0.5, 0.5), &kappa).unwrap();
        let f = build_f(&bands, 0, &z).unwrap();
        for (k, p) in bands.grid.iter().enumerate() {
            let want = if z.eval(p.cos()) == 0.0 { 0.0 } else { -z.eval(p.cos()) / p.sin() };
            assert!((f[k] - want).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn commutator_identity_and_symmetry() {
        let g = cos_grid(2048, (-0.5, 0.5)).unwrap();
        assert!(g.identity_defect() < 1e-10);
        assert!(g.hermiticity_defect < 1e-10, "{}", g.hermiticity_defect);
        let d = g.commutator_defect(0, 256);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn gap_window_gives_zero_operator() {
        let sym = catalog::off_diagonal(2.0, 1.0);
        let bands = compute_bands(&sym, 512).unwrap();
        let kappa = compute_critical_set(&sym, &bands).unwrap();
        let g = build_conjugate(&bands, &kappa, (-0.5, 0.5)).unwrap();
        assert!(g.is_zero());
        let x = StartVectors::new(3).vector(2 * 2 * 64);
        let y = g.apply_window(&LatticeWindow::two_sided(64, 2), &x).unwrap();
        assert!(norm(&y) == 0.0);
        assert_eq!(weight_regularity_check(&g, 64, 1).unwrap(), 0.0);
    }

    #[test]
    fn pulled_back_operator_is_symmetric() {
        let g = cos_grid(256, (-0.5, 0.5)).unwrap();
        let w = LatticeWindow::two_sided(64, 1);
        let mut rng = StartVectors::new(9);
        let x = rng.vector(w.dim());
        let y = rng.vector(w.dim());
        let ax = g.apply_window(&w, &x).unwrap();
        let ay = g.apply_window(&w, &y).unwrap();
        assert!((dot(&x, &ay) - dot(&ax, &y)).norm() < 1e-12);
    }
}
