mod common;

use proptest::prelude::*;

fn ok(r: common::Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED), ..ProptestConfig::default() })]

    #[test]
    fn assemblies_are_hermitian(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3, which in 0u8..4) {
        ok(common::hermiticity(seed, n, m, which))?;
    }

    #[test]
    fn inertia_is_monotone(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        ok(common::inertia_monotone(seed, n, m))?;
    }

    #[test]
    fn eigencounts_agree(seed in any::<u64>(), n in 1usize..=2, m in 1usize..=2, which in 0u8..4) {
        ok(common::eigencount(seed, n, m, which))?;
    }

    #[test]
    fn propagator_is_unitary_and_composes(seed in any::<u64>(), n in 1usize..=2, t in -20.0f64..20.0, s in -20.0f64..20.0) {
        ok(common::propagator(seed, n, 1, t, s))?;
    }

    #[test]
    fn besov_norm_is_a_norm(seed in any::<u64>(), n in 1usize..=3, half in 4usize..200) {
        ok(common::besov_triangle(seed, n, half))?;
    }

    #[test]
    fn annulus_hs_is_sqrt_pv(which in 0u8..4, k in 1u32..6) {
        ok(common::annulus_hs(which, 2f64.powi(k as i32)))?;
    }
}
