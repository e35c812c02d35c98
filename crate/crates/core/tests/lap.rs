use toeplitz_spectra::eig::hermitian_eig_dense;
use toeplitz_spectra::lap::*;
use toeplitz_spectra::lattice::{assemble_laurent, weight_vector, LatticeWindow, LinearOperator};
use toeplitz_spectra::linalg::{norm, StartVectors};
use toeplitz_spectra::symbol::catalog;
use toeplitz_spectra::{LatticeModel, C64};

fn cos_h(half: usize) -> toeplitz_spectra::lattice::BandedBlockMatrix {
    assemble_laurent(&catalog::scalar_cos(), &LatticeWindow::two_sided(half, 1)).unwrap()
}

#[test]
fn residual_contract() {
    let h = cos_h(512);
    let b = StartVectors::new(2).vector(h.dim());
    let z = C64::new(0.3, 0.01);
    let x = resolvent_solve(&h, z, &b).unwrap();
    let hx = h.apply(&x);
    let r: Vec<C64> = hx.iter().zip(&x).zip(&b).map(|((h, x), b)| h - z * x - b).collect();
    assert!(norm(&r) <= 1e-10 * norm(&b));
}

#[test]
fn real_shift_in_gap_matches_dense_bound() {
    let model = LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0));
    let h = model.assemble(64).unwrap();
    let (vals, _) = hermitian_eig_dense(&h.to_dense()).unwrap();
    let z = 0.4;
    let dist = vals.iter().map(|v| (v - z).abs()).fold(f64::INFINITY, f64::min);
    let b = StartVectors::new(7).vector(h.dim());
    let x = resolvent_solve(&h, C64::new(z, 0.0), &b).unwrap();
    assert!(norm(&x) <= norm(&b) / dist * (1.0 + 1e-6));
}

#[test]
fn gap_norm_is_bounded_by_distance() {
    let model = LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0));
    let h = model.assemble(256).unwrap();
    let s = 1.0;
    // <N>^{-2s} has norm 1 (attained at n = 0)
    for mu in [1e-1, 1e-2, 1e-3] {
        let v = weighted_resolvent_norm(&h, 0.5, mu, s).unwrap();
        assert!(v * 0.5 <= 1.0 + 1e-4, "{v}");
    }
}

#[test]
fn nonincreasing_in_s_and_symmetric_in_mu() {
    let h = cos_h(256);
    let a = weighted_resolvent_norm(&h, 0.3, 0.05, 0.6).unwrap();
    let b = weighted_resolvent_norm(&h, 0.3, 0.05, 1.0).unwrap();
    let c = weighted_resolvent_norm(&h, 0.3, 0.05, 1.5).unwrap();
    assert!(a >= b * (1.0 - 1e-4) && b >= c * (1.0 - 1e-4), "{a} {b} {c}");
    let m = weighted_resolvent_norm(&h, 0.3, -0.05, 1.0).unwrap();
    assert!((m - b).abs() <= 1e-6 * b, "{m} {b}");
}

#[test]
fn interior_ratio_and_window_agreement() {
    let r2 = weighted_resolvent_norm(&cos_h(1024), 0.3, 1e-2, 1.0).unwrap();
    let r3 = weighted_resolvent_norm(&cos_h(1024), 0.3, 1e-3, 1.0).unwrap();
    let r3d = weighted_resolvent_norm(&cos_h(2048), 0.3, 1e-3, 1.0).unwrap();
    assert!(r3 / r2 <= 1.5);
    assert!((r3 - r3d).abs() <= 0.1 * r3d);
    let e2 = weighted_resolvent_norm(&cos_h(1024), 1.0, 1e-2, 1.0).unwrap();
    let e3 = weighted_resolvent_norm(&cos_h(1024), 1.0, 1e-3, 1.0).unwrap();
    assert!(e3 / e2 >= 3.0);
}

#[test]
fn sweep_verdicts() {
    let cos = LatticeModel::laurent(catalog::scalar_cos());
    let opts = LapOptions::default();
    let p = lap_sweep(&cos, 0.3, 1.0, None, 1024, &opts).unwrap();
    assert_eq!(p.verdict, Verdict::Bounded);
    let e = lap_sweep(&cos, 1.0, 1.0, None, 1024, &opts).unwrap();
    assert_eq!(e.verdict, Verdict::Growing);
    assert!(e.decade_ratio >= 3.0);
    let ssh = LatticeModel::toeplitz(catalog::off_diagonal(2.0, 1.0));
    let n = lap_sweep(&ssh, 0.0, 1.0, None, 1024, &opts).unwrap();
    assert_eq!(n.verdict, Verdict::NearEigenvalue);
    assert!(n.nearby_eigenvalue.unwrap().abs() < 1e-8);
    let g = lap_sweep(&ssh, 0.5, 1.0, None, 1024, &opts).unwrap();
    assert_eq!(g.verdict, Verdict::Bounded);
}

#[test]
fn holder_exponent_inside_band() {
    let h = cos_h(10240);
    let f = holder_fit(&h, 0.3, 1.0, &default_holder_deltas(2.0), 1e-3).unwrap();
    assert!(!f.inconclusive);
    assert!(f.slope >= 0.35);
}

#[test]
fn weights_are_plain_powers() {
    let w = LatticeWindow::two_sided(4, 1);
    let x = vec![C64::new(1.0, 0.0); 8];
    let y = weight_vector(&x, &w, 1.0);
    assert!((y[0].re - 1.0 / 17f64.sqrt()).abs() < 1e-15);
}
