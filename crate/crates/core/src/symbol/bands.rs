use super::MatrixSymbol;
use crate::linalg::fourier::{grid_point, GridFft};
use crate::linalg::{jacobi_eigh, CMat};
use crate::{Error, Result, C64};
use rayon::prelude::*;

pub const DEFAULT_GRID: usize = 2048;
const JACOBI_TOL: f64 = 1e-14;

/// Eigencurves of `h(p)` on the grid `p_k = -pi + 2 pi k / K`.
///
/// `sorted[k]` holds the ascending eigenvalues at `p_k`. `branches` follow
/// the analytic eigencurves through crossings by eigenvector continuity,
/// so band intervals and flat flags are those of the analytic labeling.
#[derive(Debug, Clone)]
pub struct BandStructure {
    pub grid: Vec<f64>,
    pub sorted: Vec<Vec<f64>>,
    pub branches: Vec<Branch>,
    /// Branch `j` at `p_{K-1}` continues as branch `wrap[j]` at `p_0`.
    pub wrap: Vec<usize>,
    pub scale: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub values: Vec<f64>,
    /// `lambda'` by Hellmann-Feynman, `<W, h' W>`.
    pub derivs: Vec<f64>,
    /// Unit eigenvectors in a parallel-transport gauge.
    pub frames: Vec<Vec<C64>>,
    pub interval: (f64, f64),
    pub flat: bool,
}

impl BandStructure {
    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn band_count(&self) -> usize {
        self.branches.len()
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.branches.iter().map(|b| b.interval).collect()
    }

    pub fn flat_flags(&self) -> Vec<bool> {
        self.branches.iter().map(|b| b.flat).collect()
    }

    /// `max(sup lambda) - min(inf lambda)`.
    pub fn diameter(&self) -> f64 {
        let lo = self.branches.iter().map(|b| b.interval.0).fold(f64::INFINITY, f64::min);
        let hi = self.branches.iter().map(|b| b.interval.1).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// `max |lambda_j'|` over all branches and grid points.
    pub fn max_group_velocity(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.derivs.iter())
            .fold(0.0f64, |m, d| m.max(d.abs()))
    }

    /// Largest gap between the Hellmann-Feynman derivative and the spectral
    /// derivative of the sampled curve, over branches that close up smoothly.
    pub fn spectral_derivative_check(&self) -> f64 {
        let fft = GridFft::new(self.grid_size());
        let mut worst = 0.0f64;
        for (j, b) in self.branches.iter().enumerate() {
            if self.wrap[j] != j || b.flat {
                continue;
            }
            let f: Vec<C64> = b.values.iter().map(|v| C64::new(*v, 0.0)).collect();
            let d = fft.derivative(&f);
            for (x, y) in d.iter().zip(&b.derivs) {
                worst = worst.max((x.re - y).abs());
            }
        }
        worst
    }
}

/// Eigen-decomposition at one point with degenerate clusters rotated to
/// diagonalize `h'` and ordered by derivative. Returns values, unit vectors
/// (columns) and derivatives.
pub(crate) fn resolved_eig(sym: &MatrixSymbol, p: f64, cluster_tol: f64) -> Result<(Vec<f64>, CMat, Vec<f64>)> {
    let h = sym.eval(p);
    let (vals, mut vecs) = jacobi_eigh(&h, JACOBI_TOL).map_err(|_| Error::NonConvergence {
        what: format!("Jacobi eigensolver at p = {p:.12}"),
        iterations: 0,
    })?;
    let n = vals.len();
    let dh = sym.eval_derivative(p);
    let mut derivs = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[end - 1] <= cluster_tol {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            let w = vecs.columns(start, m).into_owned();
            let d = w.adjoint() * &dh * &w;
            let (dv, u) = jacobi_eigh(&d, JACOBI_TOL)?;
            let rotated = &w * u;
            vecs.columns_mut(start, m).copy_from(&rotated);
            derivs[start..end].copy_from_slice(&dv);
        } else {
            let w = vecs.column(start);
            derivs[start] = (w.adjoint() * &dh * w)[(0, 0)].re;
        }
        start = end;
    }
    Ok((vals, vecs, derivs))
}

pub(crate) fn cluster_tol(sym: &MatrixSymbol) -> f64 {
    1e-10 * sym.scale().max(1e-300)
}

/// Sample the band structure on a `K`-point grid.
pub fn compute_bands(sym: &MatrixSymbol, k: usize) -> Result<BandStructure> {
    let m = sym.cutoff();
    if !k.is_power_of_two() || k < 4 * m + 4 {
        return Err(Error::precondition(format!(
            "grid size {k} must be a power of two and at least {}",
            4 * m + 4
        )));
    }
    let n = sym.block_size();
    let scale = sym.scale();
    let ctol = cluster_tol(sym);
    let grid: Vec<f64> = (0..k).map(|i| grid_point(i, k)).collect();
    let points: Vec<(Vec<f64>, CMat, Vec<f64>)> = grid
        .par_iter()
        .map(|&p| resolved_eig(sym, p, ctol))
        .collect::<Result<_>>()?;

    let mut max_residual = 0.0f64;
    for (&p, (vals, vecs, _)) in grid.iter().zip(&points) {
        let h = sym.eval(p);
        for (j, v) in vals.iter().enumerate() {
            let w = vecs.column(j);
            let r = (&h * w - w * C64::new(*v, 0.0)).norm();
            max_residual = max_residual.max(r);
        }
    }
    if max_residual > 1e-10 * scale.max(1e-300) {
        return Err(Error::NonConvergence {
            what: format!("band eigenpairs (residual {max_residual:e})"),
            iterations: 0,
        });
    }

    // perm[k][j] = sorted index of branch j at p_k
    let mut perm = vec![(0..n).collect::<Vec<usize>>()];
    for i in 0..k - 1 {
        let next = match_frames(&points[i].1, &points[i + 1].1);
        let cur = &perm[i];
        perm.push(cur.iter().map(|&a| next[a]).collect());
    }
    let closing = match_frames(&points[k - 1].1, &points[0].1);
    let last = &perm[k - 1];
    let wrap: Vec<usize> = (0..n)
        .map(|j| {
            let s = closing[last[j]];
            perm[0].iter().position(|&x| x == s).unwrap()
        })
        .collect();

    let mut branches = Vec::with_capacity(n);
    for j in 0..n {
        let mut values = Vec::with_capacity(k);
        let mut derivs = Vec::with_capacity(k);
        let mut frames: Vec<Vec<C64>> = Vec::with_capacity(k);
        for i in 0..k {
            let s = perm[i][j];
            values.push(points[i].0[s]);
            derivs.push(points[i].2[s]);
            let mut f: Vec<C64> = points[i].1.column(s).iter().copied().collect();
            if let Some(prev) = frames.last() {
                let o = crate::linalg::dot(prev, &f);
                if o.norm() > 0.0 {
                    let ph = o.conj() / o.norm();
                    for x in f.iter_mut() {
                        *x *= ph;
                    }
                }
            }
            frames.push(f);
        }
        if wrap[j] == j {
            let o = crate::linalg::dot(&frames[k - 1], &frames[0]);
            if o.norm() > 0.0 {
                // spread the holonomy evenly so the gauge closes up smoothly
                let gamma = o.arg();
                for (i, f) in frames.iter_mut().enumerate() {
                    let ph = C64::from_polar(1.0, gamma * i as f64 / k as f64);
                    for x in f.iter_mut() {
                        *x *= ph;
                    }
                }
            }
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        branches.push(Branch {
            values,
            derivs,
            frames,
            interval: (lo, hi),
            flat: false,
        });
    }
    let lo = branches.iter().map(|b| b.interval.0).fold(f64::INFINITY, f64::min);
    let hi = branches.iter().map(|b| b.interval.1).fold(f64::NEG_INFINITY, f64::max);
    let flat_tol = 1e-10 * (hi - lo + 1.0);
    for b in branches.iter_mut() {
        b.flat = b.interval.1 - b.interval.0 <= flat_tol;
    }
    let sorted = points.into_iter().map(|(v, _, _)| v).collect();
    Ok(BandStructure {
        grid,
        sorted,
        branches,
        wrap,
        scale,
        max_residual,
    })
}

/// Assign each column of `a` to a column of `b` by greedy maximal overlap.
fn match_frames(a: &CMat, b: &CMat) -> Vec<usize> {
    let n = a.ncols();
    let o = a.adjoint() * b;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((o[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut out = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    out
}

/// Merge band intervals into sorted disjoint closed intervals.
pub fn essential_spectrum(bands: &BandStructure) -> Vec<(f64, f64)> {
    merge_intervals(bands.intervals(), 1e-12 * (bands.diameter() + 1.0))
}

pub(crate) fn merge_intervals(mut iv: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 + tol => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}
