use proptest::prelude::*;
use qbm::particle::{InternalSystem, PeriodicBox, build_laplacian, propagation_bound_scan, spectral_average_hopping};

#[test]
fn propagation_kappa_is_stable_under_box_growth() {
    let sys = InternalSystem::two_level(1.0).unwrap();
    let h = build_laplacian(1, 2);
    let times = [0.5, 1.0, 2.0, 3.0];
    let kappa = |side| propagation_bound_scan(&h, &sys, 1.0, 0.0, &times, &PeriodicBox::new(1, side).unwrap()).unwrap().kappa;
    let (small, large) = (kappa(41), kappa(61));
    assert!(small.is_finite());
    assert!((small / large - 1.0).abs() < 0.05, "{small} vs {large}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn averaged_hopping_is_idempotent(eps in 0.3f64..3.0) {
        let sys = InternalSystem::two_level(eps).unwrap();
        let once = spectral_average_hopping(&build_laplacian(2, 2), &sys).unwrap();
        let twice = spectral_average_hopping(&once, &sys).unwrap();
        let lat = PeriodicBox::new(2, 5).unwrap();
        prop_assert!((once.dense(&lat) - twice.dense(&lat)).norm() < 1e-12);
    }
}
