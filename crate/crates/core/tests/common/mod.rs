//! Randomized property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use toeplitz_spectra::eig::{eigs_in_interval, hermitian_eig_dense, inertia_count, EigOptions};
use toeplitz_spectra::lattice::{
    assemble_hankel_corner, assemble_laurent, assemble_perturbation, assemble_toeplitz, besov_norm, BandedBlockMatrix,
    LatticeWindow, PerturbationKind, PerturbationSpec, Support, VectorProfile,
};
use toeplitz_spectra::linalg::{hermitian_defect, norm, CMat, StartVectors};
use toeplitz_spectra::perturb::nv_pv;
use toeplitz_spectra::scatter::{chebyshev_propagate, PropagatorPlan, DEFAULT_PROP_EPS};
use toeplitz_spectra::symbol::MatrixSymbol;
use toeplitz_spectra::{LatticeModel, C64};

pub type Check = Result<(), String>;

fn random_block(rng: &mut StartVectors, n: usize) -> CMat {
    let v = rng.vector(n * n);
    CMat::from_fn(n, n, |i, j| v[i * n + j] * (n as f64))
}

/// Random symbol with block size `n` and cutoff `m`.
pub fn random_symbol(seed: u64, n: usize, m: usize) -> MatrixSymbol {
    let mut rng = StartVectors::new(seed);
    let x = random_block(&mut rng, n);
    let mut entries = vec![(0i64, (&x + x.adjoint()) * C64::new(0.5, 0.0))];
    for j in 1..=m as i64 {
        entries.push((j, random_block(&mut rng, n)));
    }
    MatrixSymbol::from_signed(n, &entries).unwrap()
}

/// One of a few perturbation families, picked by `which`.
pub fn random_perturbation(seed: u64, n: usize, which: u8) -> PerturbationSpec {
    let mut rng = StartVectors::new(seed ^ 0xBEEF);
    let kind = match which % 4 {
        0 => PerturbationKind::Exponential { c: 0.8, kappa: 0.7 },
        1 => PerturbationKind::RankOne {
            strength: 1.3,
            profile: VectorProfile::Exponential { amplitude: 1.0, rate: 0.5 },
            direction: Some(rng.vector(n)),
        },
        2 => {
            let d = random_block(&mut rng, n);
            PerturbationKind::Box {
                size: 3,
                entries: vec![(1, -2, random_block(&mut rng, n)), (0, 0, &d + d.adjoint())],
            }
        }
        _ => PerturbationKind::Power { c: 0.5, s: 1.5 },
    };
    PerturbationSpec::new(kind, false, n).unwrap()
}

fn relative_defect(b: &BandedBlockMatrix) -> f64 {
    let d = b.to_dense();
    hermitian_defect(&d) / d.norm().max(1e-300)
}

/// Every assembly (Laurent, Toeplitz, Hankel corner, perturbation, sum) is Hermitian.
pub fn hermiticity(seed: u64, n: usize, m: usize, which: u8) -> Check {
    let sym = random_symbol(seed, n, m);
    let v = random_perturbation(seed, n, which);
    let two = LatticeWindow::two_sided(12, n);
    let one = LatticeWindow::one_sided(12, n);
    let laurent = assemble_laurent(&sym, &two).map_err(|e| e.to_string())?;
    let mats = [
        ("laurent", laurent.clone()),
        ("toeplitz", assemble_toeplitz(&sym, &one).map_err(|e| e.to_string())?),
        ("hankel corner", assemble_hankel_corner(&sym, &two).map_err(|e| e.to_string())?),
        ("perturbation", assemble_perturbation(&v, &two).map_err(|e| e.to_string())?),
        (
            "perturbed",
            LatticeModel::laurent(sym.clone()).with_perturbation(v.clone()).assemble(12).map_err(|e| e.to_string())?,
        ),
    ];
    for (name, b) in &mats {
        let d = relative_defect(b);
        if d > 1e-13 {
            return Err(format!("{name}: relative Hermiticity defect {d:e}"));
        }
    }
    Ok(())
}

/// The inertia count is nondecreasing in the shift and spans `0..=dim`.
pub fn inertia_monotone(seed: u64, n: usize, m: usize) -> Check {
    let sym = random_symbol(seed, n, m);
    let b = assemble_laurent(&sym, &LatticeWindow::two_sided(20, n)).map_err(|e| e.to_string())?;
    let (lo, hi) = b.gershgorin();
    let mut last = 0;
    let mut breakdowns = 0;
    for k in 0..=40 {
        let x = lo - 0.1 + (hi - lo + 0.2) * k as f64 / 40.0;
        let p = inertia_count(&b, x);
        // an exactly singular leading block is flagged, not miscounted
        if !p.factorization_ok {
            breakdowns += 1;
            continue;
        }
        let c = p.count_below;
        if c < last {
            return Err(format!("count drops from {last} to {c} at {x}"));
        }
        last = c;
    }
    if breakdowns > 2 {
        return Err(format!("{breakdowns} factorization breakdowns in 41 probes"));
    }
    if inertia_count(&b, lo - 0.1).count_below != 0 || last != b.dim() {
        return Err(format!("counts do not span 0..={}", b.dim()));
    }
    Ok(())
}

/// Inertia differences, dense eigenvalues and extracted multiplicities agree.
pub fn eigencount(seed: u64, n: usize, m: usize, which: u8) -> Check {
    let sym = random_symbol(seed, n, m);
    let v = random_perturbation(seed, n, which);
    let b = LatticeModel::toeplitz(sym).with_perturbation(v).assemble(16).map_err(|e| e.to_string())?;
    let (vals, _) = hermitian_eig_dense(&b.to_dense()).map_err(|e| e.to_string())?;
    let (glo, ghi) = b.gershgorin();
    let mut rng = StartVectors::new(seed ^ 0xC0DE);
    let r = rng.vector(2);
    let t = |z: C64| 0.5 + z.re;
    let (mut x, mut y) = (glo + (ghi - glo) * t(r[0]), glo + (ghi - glo) * t(r[1]));
    if x > y {
        std::mem::swap(&mut x, &mut y);
    }
    // keep the ends away from eigenvalues so all three counts are well posed
    let gap = |z: f64| vals.iter().map(|v| (v - z).abs()).fold(f64::INFINITY, f64::min);
    if gap(x) < 1e-6 || gap(y) < 1e-6 || y - x < 1e-3 {
        return Ok(());
    }
    let dense = vals.iter().filter(|v| **v > x && **v < y).count();
    let inertia = inertia_count(&b, y).count_below - inertia_count(&b, x).count_below;
    let found: usize = eigs_in_interval(&b, x, y, &EigOptions::default())
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| p.multiplicity)
        .sum();
    if dense != inertia || dense != found {
        return Err(format!("({x}, {y}): dense {dense}, inertia {inertia}, extracted {found}"));
    }
    Ok(())
}

/// The propagator preserves the norm and composes in time.
pub fn propagator(seed: u64, n: usize, m: usize, t: f64, s: f64) -> Check {
    let sym = random_symbol(seed, n, m);
    let h = assemble_laurent(&sym, &LatticeWindow::two_sided(200, n)).map_err(|e| e.to_string())?;
    let plan = PropagatorPlan::for_matrices(&[&h], DEFAULT_PROP_EPS).map_err(|e| e.to_string())?;
    let w = *h.window();
    let mut psi = StartVectors::new(seed ^ 0xF00D).vector(h.dim());
    for (i, v) in psi.iter_mut().enumerate() {
        if w.position(i / n).abs() > 8 {
            *v = C64::new(0.0, 0.0);
        }
    }
    let n0 = norm(&psi);
    let go = |x: &[C64], t: f64| chebyshev_propagate(&h, x, t, &plan).map_err(|e| e.to_string());
    let whole = go(&psi, t + s)?;
    let split = go(&go(&psi, t)?, s)?;
    let tol = 10.0 * DEFAULT_PROP_EPS * (1.0 + t.abs() + s.abs()) * n0;
    let nd = (norm(&whole) - n0).abs();
    if nd > tol {
        return Err(format!("norm drift {nd:e} at t = {}", t + s));
    }
    let gd = norm(&whole.iter().zip(&split).map(|(a, b)| a - b).collect::<Vec<_>>());
    if gd > tol {
        return Err(format!("group law defect {gd:e} for t = {t}, s = {s}"));
    }
    Ok(())
}

/// `besov(x + y) <= besov(x) + besov(y)` and positive homogeneity.
pub fn besov_triangle(seed: u64, n: usize, half_length: usize) -> Check {
    let w = LatticeWindow::two_sided(half_length, n);
    let mut rng = StartVectors::new(seed);
    let x = rng.vector(w.dim());
    let y: Vec<C64> = rng.vector(w.dim()).iter().map(|v| v * 3.0).collect();
    let sum: Vec<C64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let (a, b, c) = (besov_norm(&x, &w), besov_norm(&y, &w), besov_norm(&sum, &w));
    if c > (a + b) * (1.0 + 1e-12) {
        return Err(format!("{c} > {a} + {b}"));
    }
    let scaled: Vec<C64> = x.iter().map(|v| v * C64::new(0.0, -2.5)).collect();
    let d = besov_norm(&scaled, &w);
    if (d - 2.5 * a).abs() > 1e-12 * d {
        return Err(format!("not homogeneous: {d} vs {}", 2.5 * a));
    }
    Ok(())
}

/// The Hilbert-Schmidt norm of the rows `r <= |i| <= 2r` of `V` is `sqrt(p_V(r))`.
///
/// Finite-support families are read off an assembled window; the power family
/// is summed entrywise far enough out that its tail is below `1e-12`.
pub fn annulus_hs(which: u8, r: f64) -> Check {
    let v = random_perturbation(7, 1, which);
    let rows = (-2 * r as i64..=2 * r as i64).filter(|i| i.unsigned_abs() as f64 >= r);
    let hs = match v.support() {
        Support::Radius(_) => {
            let w = LatticeWindow::two_sided(400, 1);
            let b = assemble_perturbation(&v, &w).map_err(|e| e.to_string())?;
            rows.map(|i| {
                let site = w.site(i).unwrap();
                (0..w.sites()).map(|c| b.entry(site, c).norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
        }
        Support::Unbounded => rows
            .map(|i| (-100_000..=100_000).map(|j| v.magnitude(i, j).powi(2)).sum::<f64>())
            .sum(),
    };
    let (_, p_v) = nv_pv(&v, r);
    if (hs.sqrt() - p_v.sqrt()).abs() > 1e-8 * p_v.sqrt().max(1e-300) {
        return Err(format!("r = {r}: {} vs {}", hs.sqrt(), p_v.sqrt()));
    }
    Ok(())
}
