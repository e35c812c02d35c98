use toeplitz_spectra::lattice::{PerturbationKind, PerturbationSpec, VectorProfile};
use toeplitz_spectra::mourre::*;
use toeplitz_spectra::symbol::{catalog, compute_bands, compute_critical_set};
use toeplitz_spectra::{Error, LatticeModel, C64};

fn rank_one_at_origin(strength: f64) -> PerturbationSpec {
    let kind = PerturbationKind::RankOne {
        strength,
        profile: VectorProfile::Explicit(vec![(0, vec![C64::new(1.0, 0.0)])]),
        direction: None,
    };
    PerturbationSpec::new(kind, false, 1).unwrap()
}

#[test]
fn free_cos_estimate() {
    let model = LatticeModel::laurent(catalog::scalar_cos());
    let r = mourre_check(&model, (-0.5, 0.5), 512, &MourreOptions::default()).unwrap();
    assert!(r.lower_bound >= 0.9);
    assert!(r.upper_bound <= 1.1);
    assert_eq!(r.defect_rank, 0);
}

#[test]
fn rank_one_defect_is_small_and_stable() {
    let model = LatticeModel::laurent(catalog::scalar_cos()).with_perturbation(rank_one_at_origin(0.3));
    let s = mourre_stability(&model, (-0.5, 0.5), 512, &MourreOptions::default()).unwrap();
    assert!(s.base.defect_rank <= 3);
    assert!(s.stable);
    assert!(s.base.bulk_lower_bound.unwrap() >= 0.9);
}

#[test]
fn gap_interval_is_empty() {
    let model = LatticeModel::laurent(catalog::off_diagonal(2.0, 1.0));
    // the spectral hull is [-3, 3], so a sharper filter is needed
    let opts = MourreOptions {
        degree: 600,
        ..MourreOptions::default()
    };
    let r = mourre_check(&model, (-0.5, 0.5), 128, &opts);
    assert!(matches!(r, Err(Error::EmptySubspace)), "{r:?}");
}

#[test]
fn weight_regularity_converges() {
    let sym = catalog::scalar_cos();
    let bands = compute_bands(&sym, 4096).unwrap();
    let kappa = compute_critical_set(&sym, &bands).unwrap();
    let g = build_conjugate(&bands, &kappa, (-0.5, 0.5)).unwrap();
    assert_eq!(weight_regularity_check(&g, 512, 0).unwrap(), 1.0);
    let a = weight_regularity_check(&g, 512, 1).unwrap();
    let b = weight_regularity_check(&g, 1024, 1).unwrap();
    assert!((a - b).abs() <= 0.1 * b);
}
