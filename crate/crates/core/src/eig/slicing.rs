use crate::lattice::{BandedBlockMatrix, LatticeWindow, LinearOperator};
use crate::linalg::{dot, jacobi_eigh, orthonormalize, BandLu, CMat, HermitianBand, StartVectors};
use crate::model::LatticeModel;
use crate::special::next_pow2;
use crate::symbol::{compute_bands, compute_critical_set, essential_spectrum, DEFAULT_GRID};
use crate::{Error, Result, C64, DEFAULT_SEED};

/// Result of one Sylvester inertia probe.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InertiaProbe {
    pub shift: f64,
    pub count_below: usize,
    pub factorization_ok: bool,
}

/// Eigenpair of a finite section with its certification data.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ValidatedEigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    /// Norm on the outer 10% of the window.
    pub boundary_mass: f64,
    /// `|value(L) - value(2L)|`, filled in by [`gap_eigenvalues`].
    pub stability: Option<f64>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EigOptions {
    pub max_eigs: usize,
    pub seed: u64,
    /// Bisection stops at width `bisect_tol * scale`.
    pub bisect_tol: f64,
    /// Eigenvalues closer than `cluster_tol * scale` are treated together.
    pub cluster_tol: f64,
    pub residual_tol: f64,
    pub outer_fraction: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            max_eigs: 512,
            seed: DEFAULT_SEED,
            bisect_tol: 1e-10,
            cluster_tol: 1e-9,
            residual_tol: 1e-8,
            outer_fraction: 0.1,
        }
    }
}

/// Spectrum slicing on one matrix: a scalar band copy plus its scale.
#[derive(Debug, Clone)]
pub struct Slicer<'a> {
    matrix: &'a BandedBlockMatrix,
    band: HermitianBand,
    scale: f64,
}

impl<'a> Slicer<'a> {
    pub fn new(matrix: &'a BandedBlockMatrix) -> Self {
        let band = matrix.to_scalar_band();
        let (lo, hi) = band.gershgorin();
        Slicer {
            matrix,
            band,
            scale: lo.abs().max(hi.abs()).max(1.0),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn probe(&self, x: f64) -> InertiaProbe {
        match self.band.count_below(x, 1e-13 * self.scale) {
            Ok(c) => InertiaProbe {
                shift: x,
                count_below: c,
                factorization_ok: true,
            },
            Err(_) => InertiaProbe {
                shift: x,
                count_below: 0,
                factorization_ok: false,
            },
        }
    }

    /// Count below `x`, nudging the shift on breakdown.
    pub fn count(&self, x: f64) -> Result<usize> {
        for attempt in 0..6 {
            let p = self.probe(x + attempt as f64 * 1e-10 * self.scale);
            if p.factorization_ok {
                return Ok(p.count_below);
            }
        }
        Err(Error::NonConvergence {
            what: format!("inertia factorization near {x}"),
            iterations: 6,
        })
    }

    fn bisect(&self, lo: f64, hi: f64, clo: usize, chi: usize, tol: f64, out: &mut Vec<(f64, usize)>) -> Result<()> {
        if chi <= clo {
            return Ok(());
        }
        if hi - lo <= tol {
            out.push((0.5 * (lo + hi), chi - clo));
            return Ok(());
        }
        let mid = 0.5 * (lo + hi);
        let cm = self.count(mid)?.clamp(clo, chi);
        self.bisect(lo, mid, clo, cm, tol, out)?;
        self.bisect(mid, hi, cm, chi, tol, out)
    }

    /// Eigenvalue estimates in `(a, b)` with multiplicities.
    pub fn locate(&self, a: f64, b: f64, opts: &EigOptions) -> Result<Vec<(f64, usize)>> {
        let ca = self.count(a)?;
        let cb = self.count(b)?;
        let total = cb.saturating_sub(ca);
        if total > opts.max_eigs {
            return Err(Error::TooManyEigenvalues {
                count: total,
                limit: opts.max_eigs,
            });
        }
        let mut out = Vec::new();
        self.bisect(a, b, ca, cb, opts.bisect_tol * self.scale, &mut out)?;
        Ok(out)
    }

    fn residual(&self, v: &[C64], lambda: f64) -> f64 {
        let hv = self.matrix.apply(v);
        hv.iter().zip(v).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Block inverse iteration plus Rayleigh-Ritz for a cluster of `m` eigenvalues near `shift`.
    fn cluster_vectors(
        &self,
        shift: f64,
        m: usize,
        rng: &mut StartVectors,
        opts: &EigOptions,
    ) -> Result<Vec<(f64, Vec<C64>, f64)>> {
        let n = self.matrix.dim();
        let mut sigma = shift;
        let mut best: Option<Vec<(f64, Vec<C64>, f64)>> = None;
        for _restart in 0..3 {
            let lu = match BandLu::factor(&self.band, C64::new(sigma, 0.0)) {
                Ok(lu) => lu,
                Err(_) => BandLu::factor(&self.band, C64::new(sigma + 1e-11 * self.scale, 0.0))?,
            };
            let mut cols: Vec<Vec<C64>> = (0..m).map(|_| rng.vector(n)).collect();
            for it in 0..5 {
                for c in cols.iter_mut() {
                    lu.solve(c);
                }
                orthonormalize(&mut cols, 1e-14);
                while cols.len() < m {
                    let mut extra = vec![rng.vector(n)];
                    for c in cols.iter() {
                        let d = dot(c, &extra[0]);
                        crate::linalg::axpy(-d, c, &mut extra[0]);
                    }
                    cols.append(&mut extra);
                    orthonormalize(&mut cols, 1e-14);
                }
                let pairs = self.rayleigh_ritz(&cols)?;
                let worst = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
                if best.as_ref().is_none_or(|b| worst < b.iter().map(|p| p.2).fold(0.0, f64::max)) {
                    best = Some(pairs.clone());
                }
                if it >= 1 && worst <= 1e-3 * opts.residual_tol {
                    return Ok(pairs);
                }
                cols = pairs.into_iter().map(|p| p.1).collect();
            }
            // stagnation: re-centre the shift on the Ritz values and retry
            let b = best.as_ref().unwrap();
            sigma = b.iter().map(|p| p.0).sum::<f64>() / b.len() as f64;
        }
        let b = best.unwrap();
        let worst = b.iter().map(|p| p.2).fold(0.0, f64::max);
        if worst > opts.residual_tol {
            return Err(Error::NonConvergence {
                what: format!("inverse iteration at {shift} (residual {worst:e})"),
                iterations: 15,
            });
        }
        Ok(b)
    }

    fn rayleigh_ritz(&self, cols: &[Vec<C64>]) -> Result<Vec<(f64, Vec<C64>, f64)>> {
        let m = cols.len();
        let hq: Vec<Vec<C64>> = cols.iter().map(|c| self.matrix.apply(c)).collect();
        let g = CMat::from_fn(m, m, |i, j| dot(&cols[i], &hq[j]));
        let (vals, u) = jacobi_eigh(&g, 1e-15)?;
        let n = cols[0].len();
        Ok((0..m)
            .map(|k| {
                let mut v = vec![C64::new(0.0, 0.0); n];
                for (i, c) in cols.iter().enumerate() {
                    crate::linalg::axpy(u[(i, k)], c, &mut v);
                }
                let r = self.residual(&v, vals[k]);
                (vals[k], v, r)
            })
            .collect())
    }
}

/// Number of eigenvalues of `b` strictly below `x`.
pub fn inertia_count(b: &BandedBlockMatrix, x: f64) -> InertiaProbe {
    Slicer::new(b).probe(x)
}

/// Rotate a cluster basis so that the outer-region mass operator is diagonal;
/// vectors are returned from most interior to most boundary-localized.
fn separate_by_boundary(window: &LatticeWindow, vecs: Vec<Vec<C64>>, fraction: f64) -> Vec<Vec<C64>> {
    let m = vecs.len();
    if m < 2 {
        return vecs;
    }
    let nb = window.block_size;
    let outer: Vec<bool> = (0..window.sites()).map(|s| window.is_outer(s, fraction)).collect();
    let masked = |v: &Vec<C64>| -> Vec<C64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| if outer[i / nb] { *x } else { C64::new(0.0, 0.0) })
            .collect()
    };
    let pv: Vec<Vec<C64>> = vecs.iter().map(masked).collect();
    let g = CMat::from_fn(m, m, |i, j| dot(&vecs[i], &pv[j]));
    let Ok((_, u)) = jacobi_eigh(&g, 1e-15) else {
        return vecs;
    };
    let n = vecs[0].len();
    (0..m)
        .map(|k| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for (i, c) in vecs.iter().enumerate() {
                crate::linalg::axpy(u[(i, k)], c, &mut v);
            }
            v
        })
        .collect()
}

/// All eigenpairs of `b` in `(lo, hi)`; stability is left unset.
pub fn eigs_in_interval(b: &BandedBlockMatrix, lo: f64, hi: f64, opts: &EigOptions) -> Result<Vec<ValidatedEigenpair>> {
    if !(lo < hi) {
        return Err(Error::precondition(format!("empty interval ({lo}, {hi})")));
    }
    let slicer = Slicer::new(b);
    let located = slicer.locate(lo, hi, opts)?;
    // group into clusters
    let ctol = opts.cluster_tol * slicer.scale;
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for (x, m) in located {
        match clusters.last_mut() {
            Some(last) if x - last.0 <= ctol => {
                let total = last.1 + m;
                last.0 = (last.0 * last.1 as f64 + x * m as f64) / total as f64;
                last.1 = total;
            }
            _ => clusters.push((x, m)),
        }
    }
    let mut rng = StartVectors::new(opts.seed);
    let mut out = Vec::new();
    for (x, m) in clusters {
        let pairs = slicer.cluster_vectors(x, m, &mut rng, opts)?;
        let vecs: Vec<Vec<C64>> = pairs.into_iter().map(|p| p.1).collect();
        let vecs = separate_by_boundary(b.window(), vecs, opts.outer_fraction);
        for v in vecs {
            let hv = b.apply(&v);
            let value = dot(&v, &hv).re;
            let residual = slicer.residual(&v, value);
            out.push(ValidatedEigenpair {
                value,
                boundary_mass: b.window().outer_mass(&v, opts.outer_fraction),
                vector: v,
                residual,
                stability: None,
                multiplicity: m,
            });
        }
    }
    Ok(out)
}

pub const BOUNDARY_GATE: f64 = 1e-6;
pub const STABILITY_GATE: f64 = 1e-8;

/// Certified discrete eigenvalues of the infinite operator in a spectral gap.
///
/// Eigenpairs must have negligible mass near the window edge, reproduce
/// under `L -> 2L`, and stay away from the thresholds.
pub fn gap_eigenvalues(model: &LatticeModel, gap: (f64, f64), half_length: usize, opts: &EigOptions) -> Result<Vec<ValidatedEigenpair>> {
    let (lo, hi) = gap;
    let k = DEFAULT_GRID.max(next_pow2(4 * model.symbol.cutoff() + 4));
    let bands = compute_bands(&model.symbol, k)?;
    // band edges carry roundoff; a gap may end exactly on them
    let touch = 1e-9 * bands.scale.max(1.0);
    for (a, b) in essential_spectrum(&bands) {
        if a < hi - touch && b > lo + touch {
            return Err(Error::precondition(format!(
                "gap ({lo}, {hi}) meets the essential spectrum [{a}, {b}]"
            )));
        }
    }
    let kappa = compute_critical_set(&model.symbol, &bands)?;
    let exclusion = 10.0 * STABILITY_GATE;
    let h1 = model.assemble(half_length)?;
    let h2 = model.assemble(2 * half_length)?;
    let first = eigs_in_interval(&h1, lo, hi, opts)?;
    let second = eigs_in_interval(&h2, lo, hi, opts)?;
    let near_kappa = |x: f64| kappa.points.iter().any(|c| (c.value - x).abs() <= exclusion);
    let mut accepted: Vec<ValidatedEigenpair> = Vec::new();
    for mut p in first {
        if p.boundary_mass > BOUNDARY_GATE || p.residual > opts.residual_tol || near_kappa(p.value) {
            continue;
        }
        let partner = second
            .iter()
            .filter(|q| q.boundary_mass <= BOUNDARY_GATE)
            .map(|q| (q.value - p.value).abs())
            .fold(f64::INFINITY, f64::min);
        if partner <= STABILITY_GATE {
            p.stability = Some(partner);
            accepted.push(p);
        }
    }
    // multiplicity among certified vectors
    let (glo, ghi) = h1.gershgorin();
    let ctol = opts.cluster_tol * glo.abs().max(ghi.abs()).max(1.0);
    let values: Vec<f64> = accepted.iter().map(|p| p.value).collect();
    for p in accepted.iter_mut() {
        p.multiplicity = values.iter().filter(|v| (*v - p.value).abs() <= ctol).count();
    }
    Ok(accepted)
}
