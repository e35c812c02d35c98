use super::bands::{cluster_tol, resolved_eig, BandStructure};
use super::MatrixSymbol;
use crate::linalg::CMat;
use crate::{Error, Result, C64};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Stationary,
    NonsmoothCrossing,
    FlatBand,
}

impl CriticalKind {
    fn priority(self) -> u8 {
        match self {
            CriticalKind::FlatBand => 2,
            CriticalKind::NonsmoothCrossing => 1,
            CriticalKind::Stationary => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CriticalPoint {
    pub value: f64,
    pub kind: CriticalKind,
    pub witness: f64,
}

/// Thresholds: stationary values, crossing values and flat-band values.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
}

impl CriticalSet {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|c| c.value).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `[lo, hi]` to the nearest critical value, with that value.
    pub fn distance_to_interval(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.points
            .iter()
            .map(|c| {
                let d = if c.value < lo {
                    lo - c.value
                } else if c.value > hi {
                    c.value - hi
                } else {
                    0.0
                };
                (d, c.value)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn nearest(&self, x: f64) -> Option<&CriticalPoint> {
        self.points
            .iter()
            .min_by(|a, b| (a.value - x).abs().total_cmp(&(b.value - x).abs()))
    }
}

/// Branch-following eigenpair at `p`: the eigenvector closest to `reference`.
fn follow(sym: &MatrixSymbol, p: f64, reference: &[C64]) -> Result<(f64, Vec<C64>, f64)> {
    let (vals, vecs, derivs) = resolved_eig(sym, p, cluster_tol(sym))?;
    let r = CMat::from_column_slice(reference.len(), 1, reference);
    let o = r.adjoint() * &vecs;
    let best = (0..vals.len())
        .max_by(|&a, &b| o[(0, a)].norm().total_cmp(&o[(0, b)].norm()))
        .unwrap();
    Ok((vals[best], vecs.column(best).iter().copied().collect(), derivs[best]))
}

fn wrap_p(p: f64) -> f64 {
    (p + PI).rem_euclid(2.0 * PI) - PI
}

/// Sign-change root of `lambda_j'` on `[a, b]` (with `b` possibly past `pi`).
fn bisect_root(sym: &MatrixSymbol, mut a: f64, mut b: f64, da: f64, reference: &[C64]) -> Result<(f64, f64, f64)> {
    let mut sa = da.signum();
    let mut refv = reference.to_vec();
    let mut last = (0.0, 0.0);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let (v, w, d) = follow(sym, wrap_p(m), &refv)?;
        refv = w;
        last = (v, d);
        if d == 0.0 {
            return Ok((wrap_p(m), v, d));
        }
        if d.signum() == sa {
            a = m;
            sa = d.signum();
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok((wrap_p(0.5 * (a + b)), last.0, last.1))
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Stationary values, crossing values and flat-band values of the bands.
pub fn compute_critical_set(sym: &MatrixSymbol, bands: &BandStructure) -> Result<CriticalSet> {
    let k = bands.grid_size();
    let dp = 2.0 * PI / k as f64;
    let diam = bands.diameter();
    let merge_tol = 1e-6 * diam.max(1e-12);
    let mut cands: Vec<CriticalPoint> = Vec::new();

    for (j, br) in bands.branches.iter().enumerate() {
        if br.flat {
            cands.push(CriticalPoint {
                value: 0.5 * (br.interval.0 + br.interval.1),
                kind: CriticalKind::FlatBand,
                witness: bands.grid[0],
            });
            continue;
        }
        let stat_tol = 1e-8 * (br.interval.1 - br.interval.0 + 1.0);
        let closes = bands.wrap[j] == j;
        let vmax = br.derivs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut roots: Vec<(f64, f64)> = Vec::new();
        let last = if closes { k } else { k - 1 };
        for i in 0..last {
            let i1 = (i + 1) % k;
            let (d0, d1) = (br.derivs[i], br.derivs[i1]);
            let a = bands.grid[i];
            let b = a + dp;
            if d0 == 0.0 {
                roots.push((a, br.values[i]));
                continue;
            }
            let bracket = d0 * d1 < 0.0;
            // local minimum of |lambda'| without a sign change: double root candidate
            let ip = (i + k - 1) % k;
            let dip = br.derivs[ip].abs();
            let local_min = !bracket
                && d0.abs() <= dip
                && d0.abs() <= d1.abs()
                && d0.abs() < 1e-3 * vmax.max(1e-300)
                && (closes || (i > 0));
            if bracket {
                let (p, v, d) = bisect_root(sym, a, b, d0, &br.frames[i])?;
                if d.abs() < stat_tol {
                    roots.push((p, v));
                } else {
                    // a kink rather than a stationary point
                    cands.push(CriticalPoint {
                        value: v,
                        kind: CriticalKind::NonsmoothCrossing,
                        witness: p,
                    });
                }
            } else if local_min {
                let refv = br.frames[i].clone();
                let (p, f) = golden(
                    |p| follow(sym, wrap_p(p), &refv).map(|r| r.2.abs()),
                    a - dp,
                    a + dp,
                )?;
                if f < stat_tol {
                    let (v, _, _) = follow(sym, wrap_p(p), &refv)?;
                    roots.push((wrap_p(p), v));
                }
            }
        }
        roots.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in roots.windows(2) {
            let sep = (w[1].0 - w[0].0).abs();
            if sep > 1e-9 && sep < 2.0 * dp && (w[1].1 - w[0].1).abs() > merge_tol {
                return Err(Error::RefinementRequired {
                    p: w[0].0,
                    detail: format!(
                        "branch {j} has stationary points {:.3e} apart with values {} and {}",
                        sep, w[0].1, w[1].1
                    ),
                });
            }
        }
        for (p, v) in roots {
            cands.push(CriticalPoint {
                value: v,
                kind: CriticalKind::Stationary,
                witness: p,
            });
        }
        if !closes {
            cands.push(CriticalPoint {
                value: br.values[0],
                kind: CriticalKind::NonsmoothCrossing,
                witness: bands.grid[0],
            });
        }
    }

    // crossings of adjacent sorted curves
    let n = bands.band_count();
    let scale = bands.scale.max(1e-300);
    let cross_tol = 1e-7 * scale;
    let ctol = cluster_tol(sym);
    for s in 0..n.saturating_sub(1) {
        let gap = |i: usize| bands.sorted[i][s + 1] - bands.sorted[i][s];
        for i in 0..k {
            let g = gap(i);
            let gp = gap((i + k - 1) % k);
            let gn = gap((i + 1) % k);
            if g <= cross_tol {
                cands.push(CriticalPoint {
                    value: 0.5 * (bands.sorted[i][s] + bands.sorted[i][s + 1]),
                    kind: CriticalKind::NonsmoothCrossing,
                    witness: bands.grid[i],
                });
            } else if g < gp && g <= gn && g < 4.0 * dp * bands.max_group_velocity() {
                let a = bands.grid[i];
                let (p, gmin) = golden(
                    |p| {
                        let (v, _, _) = resolved_eig(sym, wrap_p(p), ctol)?;
                        Ok(v[s + 1] - v[s])
                    },
                    a - dp,
                    a + dp,
                )?;
                if gmin <= cross_tol {
                    let (v, _, _) = resolved_eig(sym, wrap_p(p), ctol)?;
                    cands.push(CriticalPoint {
                        value: 0.5 * (v[s] + v[s + 1]),
                        kind: CriticalKind::NonsmoothCrossing,
                        witness: wrap_p(p),
                    });
                }
            }
        }
    }

    cands.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut points: Vec<CriticalPoint> = Vec::new();
    for c in cands {
        match points.last_mut() {
            Some(last) if (c.value - last.value).abs() <= merge_tol => {
                if c.kind.priority() > last.kind.priority() {
                    let v = if c.kind == CriticalKind::FlatBand { c.value } else { last.value };
                    *last = CriticalPoint { value: v, ..c };
                }
            }
            _ => points.push(c),
        }
    }
    Ok(CriticalSet { points })
}
