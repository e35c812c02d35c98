use std::f64::consts::PI;
use toeplitz_spectra::lattice::{assemble_perturbation, LatticeWindow, PerturbationKind, PerturbationSpec, VectorProfile};
use toeplitz_spectra::linalg::{spectral_norm, CMat};
use toeplitz_spectra::perturb::*;
use toeplitz_spectra::C64;

fn spec(kind: PerturbationKind, half: bool) -> PerturbationSpec {
    PerturbationSpec::new(kind, half, 1).unwrap()
}

fn dense_norm(v: &PerturbationSpec, half_length: usize) -> f64 {
    let w = LatticeWindow::two_sided(half_length, v.block_size());
    let m = assemble_perturbation(v, &w).unwrap();
    let n = w.dim();
    let mut d = CMat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let col = toeplitz_spectra::lattice::LinearOperator::apply(&m, &e);
        for i in 0..n {
            d[(i, j)] = col[i];
        }
    }
    spectral_norm(&d)
}

#[test]
fn schur_constant_for_toeplitz_decay() {
    let s = schur_bounds(&spec(PerturbationKind::ToeplitzDecay { c: 1.0, p: 2.0 }, false));
    assert!((s.bound - (PI * PI / 3.0 - 1.0)).abs() < 1e-6, "{}", s.bound);
    assert_eq!(s.r, s.c);
}

#[test]
fn schur_matches_brute_force_row_sums() {
    let kinds = [
        PerturbationKind::Power { c: 0.7, s: 1.5 },
        PerturbationKind::Exponential { c: 1.3, kappa: 0.4 },
        PerturbationKind::Separable { c: 0.5, sigma: 1.8 },
    ];
    for k in kinds {
        for half in [false, true] {
            let v = spec(k.clone(), half);
            let lo = if half { 0 } else { -400000i64 };
            let brute: f64 = (lo..=400000).map(|j| v.envelope(0, j).unwrap().abs()).sum();
            let s = schur_bounds(&v);
            assert!((s.bound - brute).abs() < 2e-4 * s.bound, "{k:?} {half}: {} vs {brute}", s.bound);
        }
    }
}

#[test]
fn hs_oracles() {
    // sum_{i,j >= 0} e^{-2(i+j)}
    let e = spec(PerturbationKind::Exponential { c: 1.0, kappa: 1.0 }, true);
    assert!((hs_norm(&e) - 1.0 / (1.0 - (-2f64).exp())).abs() < 1e-12);
    let e2 = spec(PerturbationKind::Exponential { c: 1.0, kappa: 1.0 }, false);
    let q = (-2f64).exp();
    assert!((hs_norm(&e2) - (1.0 + q) / (1.0 - q)).abs() < 1e-12);

    let sep = spec(PerturbationKind::Separable { c: 1.0, sigma: 0.4 }, false);
    assert!(hs_norm(&sep).is_infinite());

    let unit = spec(
        PerturbationKind::RankOne {
            strength: 1.0,
            profile: VectorProfile::Explicit(vec![(0, vec![C64::new(1.0, 0.0)])]),
            direction: None,
        },
        false,
    );
    assert!((hs_norm(&unit) - 1.0).abs() < 1e-15);

    // Power family against a brute-force double sum with integral tail
    for half in [false, true] {
        let p = spec(PerturbationKind::Power { c: 1.0, s: 1.0 }, half);
        let n = 3000i64;
        let lo = if half { 0 } else { -n };
        let mut brute = 0.0;
        for i in lo..=n {
            for j in lo..=n {
                brute += p.envelope(i, j).unwrap().powi(2);
            }
        }
        let got = hs_norm(&p);
        assert!((got - brute.sqrt()).abs() < 1e-5, "{half}: {got} vs {}", brute.sqrt());
    }
}

#[test]
fn window_norm_respects_bounds() {
    let kinds = [
        PerturbationKind::Power { c: 1.0, s: 0.5 },
        PerturbationKind::Exponential { c: 2.0, kappa: 0.3 },
        PerturbationKind::ToeplitzDecay { c: 1.0, p: 1.5 },
        PerturbationKind::Separable { c: 1.0, sigma: 0.8 },
    ];
    for k in kinds {
        let v = spec(k.clone(), false);
        let measured = dense_norm(&v, 60);
        let bound = schur_bounds(&v).bound.min(hs_norm(&v));
        assert!(measured <= bound + 1e-8, "{k:?}: {measured} > {bound}");
        assert!(measured <= norm_bound(&v) + 1e-8);
    }
}

#[test]
fn separable_pv_slope() {
    let v = spec(PerturbationKind::Separable { c: 1.0, sigma: 1.0 }, false);
    let rs: Vec<f64> = (4..=12).map(|k| 2f64.powi(k)).collect();
    let x: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = rs.iter().map(|r| nv_pv(&v, *r).1.ln()).collect();
    let fit = toeplitz_spectra::special::linear_fit(&x, &y).unwrap();
    assert!((fit.slope + 1.0).abs() < 0.1, "slope {}", fit.slope);
}

/// Integral estimate of the row-sum part beyond `|j| > big` for the Toeplitz kind.
fn tail(v: &PerturbationSpec, big: i64) -> f64 {
    match v.kind() {
        PerturbationKind::ToeplitzDecay { c, p } => 2.0 * c * (big as f64 + 1.5).powf(1.0 - p) / (p - 1.0),
        _ => 0.0,
    }
}

#[test]
fn nv_pv_match_brute_force() {
    let kinds = [
        PerturbationKind::Power { c: 1.0, s: 0.8 },
        PerturbationKind::ToeplitzDecay { c: 1.0, p: 1.4 },
        PerturbationKind::Exponential { c: 1.0, kappa: 0.05 },
        PerturbationKind::Diagonal { c: -0.5 },
    ];
    let r = 10.0;
    for k in kinds {
        let v = spec(k.clone(), false);
        let big = 200000i64;
        let ann: Vec<i64> = (10..=20).flat_map(|p| [p, -p]).collect();
        let row = ann
            .iter()
            .map(|i| (-big..=big).map(|j| v.envelope(*i, j).unwrap().abs()).sum::<f64>() + tail(&v, big))
            .fold(0.0, f64::max);
        let col = (-60..=60)
            .map(|j| ann.iter().map(|i| v.envelope(*i, j).unwrap().abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let p: f64 = ann
            .iter()
            .map(|i| (-big..=big).map(|j| v.envelope(*i, j).unwrap().powi(2)).sum::<f64>())
            .sum();
        let (n_v, p_v) = nv_pv(&v, r);
        assert!((n_v - row * col).abs() < 1e-3 * n_v, "{k:?}: {n_v} vs {}", row * col);
        assert!((p_v - p).abs() < 1e-6 * p_v, "{k:?}: {p_v} vs {p}");
    }
}

#[test]
fn dyadic_norms_match_dense_windows() {
    let kinds = [
        PerturbationKind::Power { c: 1.0, s: 1.0 },
        PerturbationKind::ToeplitzDecay { c: 1.0, p: 2.0 },
        PerturbationKind::Separable { c: 1.0, sigma: 0.9 },
        PerturbationKind::Diagonal { c: 0.3 },
    ];
    for k in kinds {
        for half in [false, true] {
            let v = spec(k.clone(), half);
            // a window wide enough that the dropped columns are negligible
            let w = LatticeWindow::two_sided(1500, 1);
            let m = assemble_perturbation(&v, &w).unwrap();
            for r in [4.0, 8.0] {
                let d = dyadic_norm(&v, r);
                let window = masked_window_norm(&m, r);
                assert!(d.norm <= d.upper);
                assert!(window <= d.upper + 1e-8, "{k:?} {half} r={r}: {window} > {}", d.upper);
                assert!((d.norm - window).abs() < 2e-3 * d.norm, "{k:?} {half} r={r}: {} vs {window}", d.norm);
            }
        }
    }
}

#[test]
fn rank_one_dyadic_closed_form() {
    let v = spec(
        PerturbationKind::RankOne {
            strength: 2.0,
            profile: VectorProfile::Power { amplitude: 1.0, exponent: 1.0 },
            direction: None,
        },
        true,
    );
    let w = LatticeWindow::two_sided(3000, 1);
    let m = assemble_perturbation(&v, &w).unwrap();
    for r in [2.0, 8.0, 32.0] {
        let d = dyadic_norm(&v, r).norm;
        let window = masked_window_norm(&m, r);
        assert!((d - window).abs() < 1e-3 * d, "r={r}: {d} vs {window}");
    }
    let fit = cs_exponent(&dyadic_profile(&v, DEFAULT_K_MAX));
    assert!((fit.s_fit - 0.5).abs() < 0.1, "{}", fit.s_fit);
}

#[test]
fn dyadic_triangle_inequality() {
    let a = spec(PerturbationKind::Power { c: 1.0, s: 0.7 }, false);
    let b = spec(PerturbationKind::Exponential { c: -0.0 + 0.8, kappa: 0.2 }, false);
    let w = LatticeWindow::two_sided(256, 1);
    let ma = assemble_perturbation(&a, &w).unwrap();
    let mb = assemble_perturbation(&b, &w).unwrap();
    let sum = ma.add(&mb).unwrap();
    for r in [1.0, 4.0, 16.0, 64.0] {
        let s = masked_window_norm(&sum, r);
        assert!(s <= masked_window_norm(&ma, r) + masked_window_norm(&mb, r) + 1e-10);
    }
}

#[test]
fn annulus_schur_and_hs_identities() {
    // exact masked Schur/HS on a window against sqrt(n_V), sqrt(p_V)
    let v = spec(PerturbationKind::Power { c: 1.0, s: 1.2 }, false);
    let (n_v, p_v) = nv_pv(&v, 8.0);
    let d = dyadic_norm(&v, 8.0);
    // theta <= 1 and supp theta(<.>/8) lies inside 8 <= |i| <= 16
    assert!(d.norm <= n_v.sqrt() + 1e-10);
    assert!(d.norm <= p_v.sqrt() + 1e-10);
}

#[test]
fn c11_verdicts() {
    let exp = spec(PerturbationKind::Exponential { c: 1.0, kappa: 1.0 }, false);
    assert_eq!(c11_test(&dyadic_profile(&exp, DEFAULT_K_MAX)).verdict, CheckVerdict::Pass);

    let sep = spec(PerturbationKind::Separable { c: 1.0, sigma: 0.6 }, false);
    let r = c11_test(&dyadic_profile(&sep, DEFAULT_K_MAX));
    assert_eq!(r.verdict, CheckVerdict::Fail, "{r:?}");

    let pow2 = spec(PerturbationKind::Power { c: 1.0, s: 2.0 }, false);
    assert_eq!(c11_test(&dyadic_profile(&pow2, DEFAULT_K_MAX)).verdict, CheckVerdict::Pass);

    let boxed = spec(
        PerturbationKind::Box {
            size: 3,
            entries: vec![(1, -2, CMat::from_element(1, 1, C64::new(0.4, 0.1)))],
        },
        false,
    );
    assert_eq!(c11_test(&dyadic_profile(&boxed, DEFAULT_K_MAX)).verdict, CheckVerdict::Pass);
}

#[test]
fn power_generator_exponent() {
    let v = spec(PerturbationKind::Power { c: 1.0, s: 1.5 }, false);
    let fit = cs_exponent(&dyadic_profile(&v, DEFAULT_K_MAX));
    assert!((1.3..=1.7).contains(&fit.s_fit), "{fit:?}");
    let v1 = spec(PerturbationKind::Power { c: 1.0, s: 1.0 }, false);
    let fit1 = cs_exponent(&dyadic_profile(&v1, DEFAULT_K_MAX));
    assert!((fit1.s_fit - 1.0).abs() < 0.1, "{fit1:?}");
}

#[test]
fn compactness_verdicts() {
    let boxed = spec(
        PerturbationKind::Box {
            size: 5,
            entries: vec![(5, 5, CMat::from_element(1, 1, C64::new(1.0, 0.0)))],
        },
        false,
    );
    let c = compactness_test(&boxed, 1024.0);
    assert_eq!(c.verdict, CheckVerdict::Pass);
    for (r, n) in c.radii.iter().zip(&c.norms) {
        if *r > 10.0 {
            assert_eq!(*n, 0.0);
        }
    }
    let exp = spec(PerturbationKind::Exponential { c: 1.0, kappa: 0.1 }, false);
    assert_eq!(compactness_test(&exp, 1024.0).verdict, CheckVerdict::Pass);

    let id = spec(PerturbationKind::Diagonal { c: 1.0 }, false);
    let c = compactness_test(&id, 1024.0);
    assert_ne!(c.verdict, CheckVerdict::Pass);
    assert!(c.norms.iter().all(|n| (*n - 1.0).abs() < 1e-12));

    let toe = spec(PerturbationKind::ToeplitzDecay { c: 1.0, p: 2.0 }, false);
    assert_ne!(compactness_test(&toe, 1024.0).verdict, CheckVerdict::Pass);
}

#[test]
fn classification_summary() {
    let v = spec(PerturbationKind::Power { c: 1.0, s: 2.0 }, true);
    let p = classify(&v, 10).unwrap();
    assert!(p.bounded);
    assert_eq!(p.compact.verdict, CheckVerdict::Pass);
    assert_eq!(p.c11.verdict, CheckVerdict::Pass);
    assert_eq!(p.r_grid.len(), 11);
    let unbounded = classify(&spec(PerturbationKind::ToeplitzDecay { c: 1.0, p: 0.8 }, false), 6).unwrap();
    assert!(!unbounded.bounded);
}
