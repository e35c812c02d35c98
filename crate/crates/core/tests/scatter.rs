use toeplitz_spectra::eig::{eigs_in_interval, EigOptions};
use toeplitz_spectra::lattice::{assemble_perturbation, LatticeWindow, PerturbationKind, PerturbationSpec, PlateauWindow, VectorProfile};
use toeplitz_spectra::linalg::{dot, hermitian_defect, norm, StartVectors};
use toeplitz_spectra::scatter::*;
use toeplitz_spectra::symbol::{catalog, compute_bands};
use toeplitz_spectra::{Error, LatticeModel, C64};

fn diff(a: &[C64], b: &[C64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

fn rank_one(strength: f64) -> PerturbationSpec {
    PerturbationSpec::new(
        PerturbationKind::RankOne {
            strength,
            profile: VectorProfile::Exponential { amplitude: 1.0, rate: 1.0 },
            direction: None,
        },
        false,
        1,
    )
    .unwrap()
}

#[test]
fn scalar_exponential() {
    let w = LatticeWindow::two_sided(4, 1);
    let v = PerturbationSpec::new(
        PerturbationKind::Entries(vec![(0, 0, toeplitz_spectra::linalg::CMat::from_element(1, 1, C64::new(0.7, 0.0)))]),
        false,
        1,
    )
    .unwrap();
    let h = assemble_perturbation(&v, &w).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h], 1e-8).unwrap();
    let e0 = w.unit(0, 0).unwrap();
    let out = chebyshev_propagate(&h, &e0, 1.0, &plan).unwrap();
    let want: Vec<C64> = e0.iter().map(|x| x * C64::from_polar(1.0, -0.7)).collect();
    assert!(diff(&out, &want) <= 1e-8);
}

#[test]
fn unitarity_group_law_and_energy() {
    let h = LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0)).assemble(300).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h], DEFAULT_PROP_EPS).unwrap();
    let mut rng = StartVectors::new(7);
    // localized random state
    let mut psi = rng.vector(h.dim());
    let w = *h.window();
    for (i, v) in psi.iter_mut().enumerate() {
        if w.position(i / 2).abs() > 20 {
            *v = C64::new(0.0, 0.0);
        }
    }
    let n0 = norm(&psi);
    for t in [0.5, 7.0, 50.0] {
        let pt = chebyshev_propagate(&h, &psi, t, &plan).unwrap();
        assert!((norm(&pt) - n0).abs() <= DEFAULT_PROP_EPS * (1.0 + t) * n0);
        let hn = toeplitz_spectra::lattice::LinearOperator::apply(&h, &pt);
        let scale = norm(&hn).max(3.0);
        assert!(energy_drift(&h, &psi, &pt) <= 10.0 * DEFAULT_PROP_EPS * scale);
    }
    let a = chebyshev_propagate(&h, &psi, 30.0, &plan).unwrap();
    let b = chebyshev_propagate(&h, &chebyshev_propagate(&h, &psi, 12.5, &plan).unwrap(), 17.5, &plan).unwrap();
    assert!(diff(&a, &b) <= 3.0 * DEFAULT_PROP_EPS * n0);
    let back = chebyshev_propagate(&h, &a, -30.0, &plan).unwrap();
    assert!(diff(&back, &psi) <= 3.0 * DEFAULT_PROP_EPS * n0);
}

#[test]
fn narrow_hull_is_detected() {
    let h = LatticeModel::laurent(catalog::scalar_cos()).assemble(100).unwrap();
    let plan = PropagatorPlan::new(-0.2, 0.2, 1e-8).unwrap();
    let psi = h.window().unit(0, 0).unwrap();
    match chebyshev_propagate(&h, &psi, 40.0, &plan) {
        Err(Error::HullViolation { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn pac_projector_cases() {
    let w = LatticeWindow::two_sided(16, 2);
    let sym = catalog::off_diagonal(2.0, 1.0);
    let bands = compute_bands(&sym, 256).unwrap();
    let p = PacProjector::new(&sym, &bands, &w).unwrap();
    assert!(p.is_identity());

    let sym = catalog::diag_cos_flat();
    let bands = compute_bands(&sym, 256).unwrap();
    let p = PacProjector::new(&sym, &bands, &w).unwrap();
    let m = projector_matrix(&p);
    assert!(hermitian_defect(&m) < 1e-12);
    let mut rng = StartVectors::new(3);
    for _ in 0..5 {
        let x = rng.vector(w.dim());
        assert!(idempotence_defect(&p, &x) <= 1e-10);
        let px = p.apply(&x);
        for site in 0..w.sites() {
            assert!(px[2 * site + 1].norm() < 1e-12);
            assert!((px[2 * site] - x[2 * site]).norm() < 1e-12);
        }
    }
}

#[test]
fn free_decay_rates() {
    let h0 = LatticeModel::laurent(catalog::scalar_cos()).assemble(1024).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h0], DEFAULT_PROP_EPS).unwrap();
    let phi = PlateauWindow::inside(0.2, 0.6, 0.25);
    let times = [5.0, 10.0, 20.0, 30.0, 40.0, 50.0];
    let opts = DecayOptions::default();
    let d1 = propagation_decay(&h0, phi, 1.0, &times, &plan, &opts).unwrap();
    assert!(d1.slope <= -0.75, "{d1:?}");
    let d0 = propagation_decay(&h0, phi, 0.0, &times, &plan, &opts).unwrap();
    assert!(d0.slope.abs() <= 0.05, "{d0:?}");
    assert!(d0.values.iter().all(|g| (g - 1.0).abs() < 1e-2), "{d0:?}");
}

#[test]
fn gap_filter_annihilates() {
    let h0 = LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0)).assemble(256).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h0], DEFAULT_PROP_EPS).unwrap();
    let phi = PlateauWindow::inside(-0.6, 0.6, 0.25);
    let d = propagation_decay(&h0, phi, 1.0, &[5.0, 20.0], &plan, &DecayOptions::default()).unwrap();
    assert!(d.values.iter().all(|g| *g <= 1e-5), "{:?}", d.values);
}

#[test]
fn front_reaching_boundary_is_an_error() {
    let h0 = LatticeModel::laurent(catalog::scalar_cos()).assemble(64).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h0], DEFAULT_PROP_EPS).unwrap();
    let phi = PlateauWindow::inside(-0.6, 0.6, 0.25);
    match propagation_decay(&h0, phi, 1.0, &[200.0], &plan, &DecayOptions::default()) {
        Err(Error::FrontHitsBoundary { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn free_wave_operator_is_pac() {
    let model = LatticeModel::laurent(catalog::diag_cos_flat());
    let h0 = model.assemble(512).unwrap();
    let bands = compute_bands(&model.symbol, 256).unwrap();
    let pac = PacProjector::new(&model.symbol, &bands, h0.window()).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h0], DEFAULT_PROP_EPS).unwrap();
    let fw = intertwining_window(&bands).unwrap();
    let mut psi = vec![C64::new(0.0, 0.0); h0.dim()];
    let w = *h0.window();
    for n in -3..=3i64 {
        let s = w.site(n).unwrap();
        psi[2 * s] = C64::new(1.0 / (1.0 + n.abs() as f64), 0.0);
        psi[2 * s + 1] = C64::new(0.0, 0.5);
    }
    let times = [25.0, 50.0, 100.0];
    let r = wave_operator(&h0, &h0, &pac, &psi, Sign::Plus, &times, fw, &plan).unwrap();
    let pac_psi = pac.apply(&psi);
    assert!(diff(&r.omega, &pac_psi) <= 2.0 * DEFAULT_PROP_EPS * 100.0);
    assert!(r.cauchy_defects.iter().all(|d| *d <= 2.0 * DEFAULT_PROP_EPS * 100.0));

    // a flat-band eigenvector is removed entirely
    let flat = w.unit(0, 1).unwrap();
    let r = wave_operator(&h0, &h0, &pac, &flat, Sign::Minus, &times, fw, &plan).unwrap();
    assert!(norm(&r.omega) <= 1e-12);
    let c = completeness_check(&[r], &[]);
    assert_eq!(c.verdict, Completeness::Pass);
}

#[test]
fn rank_one_scattering_is_complete() {
    let model = LatticeModel::laurent(catalog::scalar_cos()).with_perturbation(rank_one(1.0));
    let l = 1024;
    let h = model.assemble(l).unwrap();
    let h0 = model.assemble_free(l).unwrap();
    let bands = compute_bands(&model.symbol, 256).unwrap();
    let pac = PacProjector::new(&model.symbol, &bands, h.window()).unwrap();
    let plan = PropagatorPlan::for_matrices(&[&h, &h0], DEFAULT_PROP_EPS).unwrap();
    let fw = intertwining_window(&bands).unwrap();
    let inputs = energy_filtered_states(&h0, PlateauWindow::inside(-0.7, 0.7, 0.25), &[-12, -4, 0, 4, 12], 200, &plan).unwrap();
    let times = [12.5, 25.0, 50.0, 100.0];
    let results: Vec<WaveOperatorResult> = inputs
        .iter()
        .map(|psi| wave_operator(&h, &h0, &pac, psi, Sign::Plus, &times, fw, &plan).unwrap())
        .collect();
    for r in &results {
        assert!(r.isometry_defect <= 1e-2 * r.input_norm);
        assert!(r.intertwining_residual <= 1e-2 * r.input_norm, "{}", r.intertwining_residual);
        assert!(r.cauchy_defects.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.cauchy_defects);
    }
    let (_, hi) = h.gershgorin();
    let bound = eigs_in_interval(&h, 1.0 + 1e-3, hi + 1.0, &EigOptions::default()).unwrap();
    assert_eq!(bound.len(), 1);
    let c = completeness_check(&results, &bound);
    assert_eq!(c.verdict, Completeness::Pass, "{c:?}");
    // the bound state is orthogonal to the scattering states
    assert!(dot(&bound[0].vector, &results[2].omega).norm() <= 2e-2 * results[2].input_norm);

    // too short a time grid cannot certify anything
    let short = [0.5, 1.0, 2.0];
    let results: Vec<WaveOperatorResult> = inputs
        .iter()
        .map(|psi| wave_operator(&h, &h0, &pac, psi, Sign::Plus, &short, fw, &plan).unwrap())
        .collect();
    assert_eq!(completeness_check(&results, &bound).verdict, Completeness::Inconclusive);
}
