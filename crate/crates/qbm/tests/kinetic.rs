use proptest::prelude::*;
use qbm::bath::BathSpec;
use qbm::kinetic::{
    build_rates, ensemble, evolve_master, gillespie_jumps, ratchet_current, tv_against_master, KineticError,
    MasterOperator, MomentumDensity, MomentumGrid, RatchetConfig,
};
use qbm::particle::InternalSystem;

fn thermal_rates(beta: f64, eps: f64) -> qbm::kinetic::JumpRates {
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(beta)).unwrap();
    build_rates(&[spec], &InternalSystem::two_level(eps).unwrap()).unwrap()
}

#[test]
fn detailed_balance_ratio() {
    for beta in [0.5, 1.0, 2.0] {
        let r = thermal_rates(beta, 1.0);
        let ratio = r.rate(1, 0) / r.rate(0, 1);
        assert!((ratio / beta.exp() - 1.0).abs() < 1e-4, "β={beta}: {ratio}");
    }
}

#[test]
fn gibbs_uniform_is_stationary() {
    let r = thermal_rates(1.0, 1.0);
    let grid = MomentumGrid::new(2, 64).unwrap();
    let rho = MomentumDensity::gibbs_uniform(grid, &r.energies, 1.0);
    let d = MasterOperator::new(&r, grid).unwrap().derivative(&rho);
    let norm = d.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(norm < 1e-8, "{norm}");
}

#[test]
fn level_populations_follow_the_two_state_solution() {
    let r = thermal_rates(1.0, 1.0);
    let grid = MomentumGrid::new(2, 64).unwrap();
    let rho0 = MomentumDensity::point(grid, 2, grid.flatten(&[32, 32]), 1);
    let traj = evolve_master(&r, &rho0, 3.0, 0.01, 0).unwrap();
    let (down, up) = (r.rate(1, 0), r.rate(0, 1));
    let eq = up / (up + down);
    for rec in &traj.records {
        let expected = eq + (1.0 - eq) * (-(up + down) * rec.tau).exp();
        assert!((rec.level_marginals[1] - expected).abs() < 1e-6);
    }
    assert!(traj.final_density.min_value() >= -1e-10);
}

#[test]
fn mass_is_conserved_over_many_steps() {
    let r = thermal_rates(0.5, 1.0);
    let grid = MomentumGrid::new(2, 64).unwrap();
    let rho0 = MomentumDensity::point(grid, 2, grid.flatten(&[10, 40]), 0);
    let traj = evolve_master(&r, &rho0, 10.0, 0.01, 0).unwrap();
    assert_eq!(traj.steps, 1000);
    let drift = traj.records.iter().map(|x| x.mass_drift.abs()).fold(0.0, f64::max);
    assert!(drift < 1e-7, "{drift}");
}

#[test]
fn coarse_grid_is_rejected() {
    let r = thermal_rates(1.0, 1.0);
    let grid = MomentumGrid::new(2, 32).unwrap();
    assert!(matches!(MasterOperator::new(&r, grid), Err(KineticError::GridTooCoarse { .. })));
}

#[test]
fn stationary_occupation_matches_gibbs() {
    let (beta, eps) = (1.0, 1.0);
    let r = thermal_rates(beta, eps);
    let traj = gillespie_jumps(&r, &[0.0, 0.0], 0, 100_000, 11).unwrap();
    let frac = traj.time_fractions(2)[1];
    let p = (-beta * eps).exp() / (1.0 + (-beta * eps).exp());
    let sigma = (p * (1.0 - p) / 100_000.0).sqrt();
    assert!((frac - p).abs() < 3.0 * sigma, "{frac} vs {p} ± {sigma}");
}

#[test]
fn ensemble_agrees_with_master_equation() {
    let r = thermal_rates(1.0, 1.0);
    let grid = MomentumGrid::new(2, 64).unwrap();
    let rho0 = MomentumDensity::point(grid, 2, grid.flatten(&[32, 32]), 1);
    let master = evolve_master(&r, &rho0, 5.0, 0.01, 0).unwrap();
    let samples = ensemble(&r, &[0.0, 0.0], 1, 5.0, 10_000, 2024).unwrap();
    let report = tv_against_master(&samples, &master.final_density, 4).unwrap();
    assert!(report.max < 0.02, "{report:?}");
}

#[test]
fn ratchet_current_signs() {
    let run = |b1: Option<f64>, b2: Option<f64>, swap: bool| {
        let mut cfg = RatchetConfig::preset(1.0, b1, b2).unwrap();
        cfg.swap_couplings = swap;
        cfg.tau_final = 10.0;
        ratchet_current(&cfg).unwrap()
    };
    let equal = run(Some(1.0), Some(1.0), false);
    assert!(equal.is_zero(), "{} ± {}", equal.velocity, equal.stderr);
    let driven = run(None, Some(1.0), false);
    assert!(driven.is_nonzero(), "{} ± {}", driven.velocity, driven.stderr);
    let swapped = run(None, Some(1.0), true);
    assert!(swapped.is_nonzero());
    assert!(driven.velocity.signum() != swapped.velocity.signum());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn detailed_balance_holds_for_any_temperature(beta in 0.2f64..3.0, eps in 0.3f64..2.5) {
        let r = thermal_rates(beta, eps);
        let ratio = r.rate(1, 0) / r.rate(0, 1);
        prop_assert!((ratio / (beta * eps).exp() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_conserves_mass(values in proptest::collection::vec(0.0f64..1.0, 2 * 64 * 64)) {
        let r = thermal_rates(1.0, 1.0);
        let grid = MomentumGrid::new(2, 64).unwrap();
        let mut rho = MomentumDensity::zeros(grid, 2);
        rho.values.copy_from_slice(&values);
        let d = MasterOperator::new(&r, grid).unwrap().derivative(&rho);
        let total: f64 = d.values.iter().sum();
        prop_assert!(total.abs() < 1e-9 * values.len() as f64);
    }
}
