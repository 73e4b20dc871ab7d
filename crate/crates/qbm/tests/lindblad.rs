use std::sync::Arc;

use approx::assert_relative_eq;
use qbm::bath::{BathSpec, RateSource, TabulatedKernel};
use qbm::lindblad::{
    assemble, dense_generator, evolve, evolve_with, kraus_certificate, kraus_certificate_with_radius, msd, unvec,
    vec_of, Alpha, EvolveOptions, LatticeDensityMatrix, LindbladError, LindbladGenerator,
};
use qbm::numerics::linalg::{expm, max_abs};
use qbm::particle::{build_laplacian, build_ratchet, sigma_x, HoppingSpec, InternalSystem, PeriodicBox};
use qbm::{CMatrix, Complex64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1.0;
const BETA: f64 = 1.0;

fn thermal(dim: usize) -> Arc<dyn RateSource> {
    Arc::new(BathSpec::smooth_bump(dim, 3.0, 1.0, Some(BETA)).unwrap())
}

fn two_level_generator(lattice_dim: usize, alpha: Alpha, r: i64) -> LindbladGenerator {
    let sys = InternalSystem::two_level(EPS).unwrap();
    assemble(vec![thermal(2)], &sys, &build_laplacian(lattice_dim, 2), alpha, r).unwrap()
}

fn random_state(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let p = &a * a.adjoint();
    let tr = p.trace();
    p / tr
}

fn dense_apply(l: &CMatrix, rho: &CMatrix) -> CMatrix {
    unvec(&(l * vec_of(rho)), rho.nrows())
}

#[test]
fn apply_matches_dense_superoperator() {
    let generator = two_level_generator(2, Alpha::Two, 2);
    let lat = PeriodicBox::new(2, 5).unwrap();
    let l = dense_generator(&generator, lat).unwrap();
    let rho = random_state(50, 1);
    let state = LatticeDensityMatrix::from_dense(generator.system(), lat, &rho, true).unwrap();
    let fast = generator.apply(&state).unwrap().to_dense();
    let slow = dense_apply(&l, &rho);
    assert!(max_abs(&(&fast - &slow)) < 1e-12 * max_abs(&slow).max(1.0));
    assert!(fast.trace().norm() < 1e-12);
}

#[test]
fn derivative_is_traceless_for_hermitian_input() {
    let generator = two_level_generator(1, Alpha::Two, 2);
    let lat = PeriodicBox::new(1, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let a = CMatrix::from_fn(14, 14, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = &a + a.adjoint();
        let state = LatticeDensityMatrix::from_dense(generator.system(), lat, &h, true).unwrap();
        let d = generator.apply(&state).unwrap().to_dense();
        let norm1 = qbm::numerics::linalg::trace_norm(&h);
        assert!(d.trace().norm() < 1e-10 * norm1);
    }
}

#[test]
fn generator_commutes_with_internal_rotation() {
    let generator = two_level_generator(1, Alpha::Two, 2);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let s = generator.system().hamiltonian().kronecker(&CMatrix::identity(1, 1));
    let big_s = CMatrix::identity(5, 5).kronecker(&s);
    let i = Complex64::new(0.0, 1.0);
    let rot = |m: &CMatrix| (&big_s * m - m * &big_s) * i;
    let apply = |m: &CMatrix| {
        let st = LatticeDensityMatrix::from_dense(generator.system(), lat, m, true).unwrap();
        generator.apply(&st).unwrap().to_dense()
    };
    for seed in 0..10 {
        let rho = random_state(10, 100 + seed);
        let lhs = apply(&rot(&rho));
        let rhs = rot(&apply(&rho));
        assert!(max_abs(&(&lhs - &rhs)) < 1e-9);
    }
}

#[test]
fn sector_restricted_state_matches_full_storage() {
    let generator = two_level_generator(2, Alpha::Two, 2);
    let lat = PeriodicBox::new(2, 5).unwrap();
    let sigma = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(0.3, 0.0), Complex64::new(0.7, 0.0)]));
    let small = LatticeDensityMatrix::localized(generator.system(), lat, lat.origin(), &sigma).unwrap();
    assert_eq!(small.active().iter().filter(|a| **a).count(), 2);
    let full = LatticeDensityMatrix::from_dense(generator.system(), lat, &small.to_dense(), true).unwrap();
    let a = evolve(&generator, &small, 0.3, 0.005).unwrap().final_state.to_dense();
    let b = evolve(&generator, &full, 0.3, 0.005).unwrap().final_state.to_dense();
    assert!(max_abs(&(&a - &b)) < 1e-14);
}

#[test]
fn rk4_matches_matrix_exponential_with_fourth_order() {
    let generator = two_level_generator(1, Alpha::Two, 2);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let l = dense_generator(&generator, lat).unwrap();
    let rho = random_state(10, 4);
    let tau = 0.6;
    let exact = dense_apply(&(expm(&(&l * Complex64::new(tau, 0.0)))), &rho);
    let state = LatticeDensityMatrix::from_dense(generator.system(), lat, &rho, true).unwrap();
    let err = |dt: f64| {
        let traj = evolve(&generator, &state, tau, dt).unwrap();
        max_abs(&(&traj.final_state.to_dense() - &exact))
    };
    let (e1, e2) = (err(0.006), err(0.003));
    assert!(e2 < 1e-8, "{e2}");
    let order = (e1 / e2).log2();
    assert!((3.5..4.5).contains(&order), "order {order}");
}

#[test]
fn two_level_populations_relax_to_gibbs() {
    let generator = two_level_generator(1, Alpha::AboveTwo, 2);
    let bath = thermal(2);
    let down = bath.rate(&[0, 0], -EPS).unwrap().re;
    let up = bath.rate(&[0, 0], EPS).unwrap().re;
    assert_relative_eq!(up / down, (-BETA * EPS).exp(), max_relative = 1e-9);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let mut plus = CMatrix::zeros(2, 2);
    plus[(0, 0)] = Complex64::new(1.0, 0.0);
    let rho = LatticeDensityMatrix::localized(generator.system(), lat, lat.origin(), &plus).unwrap();
    let traj = evolve(&generator, &rho, 3.0, 0.005).unwrap();
    let gamma = down * (1.0 + (-BETA * EPS).exp());
    let eq = up / (up + down);
    for obs in &traj.observations {
        // Eigenvalues ascend, so index 1 is |+⟩.
        let expected = eq + (1.0 - eq) * (-gamma * obs.tau).exp();
        assert!((obs.populations[1] - expected).abs() < 1e-9, "τ={} {} {}", obs.tau, obs.populations[1], expected);
        assert!(obs.trace_drift.abs() < 1e-12);
    }
}

#[test]
fn zero_internal_energy_leaves_only_hopping() {
    let sys = InternalSystem::new(CMatrix::zeros(2, 2), vec![sigma_x()]).unwrap();
    let hop = build_laplacian(1, 2);
    let generator = assemble(vec![thermal(2)], &sys, &hop, Alpha::Two, 2).unwrap();
    assert!(generator.channels().is_empty());
    let lat = PeriodicBox::new(1, 5).unwrap();
    let l = dense_generator(&generator, lat).unwrap();
    let h = hop.dense(&lat);
    let d = 10;
    let id = CMatrix::identity(d, d);
    let i = Complex64::new(0.0, 1.0);
    let pure = (id.kronecker(&h) - h.transpose().kronecker(&id)) * -i;
    assert!(max_abs(&(&l - &pure)) < 1e-14);
    let mixed = CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
    let st = LatticeDensityMatrix::from_dense(&sys, lat, &mixed, true).unwrap();
    assert!(max_abs(&generator.apply(&st).unwrap().to_dense()) < 1e-15);
}

#[test]
fn identity_coupling_has_no_dissipator() {
    let sys = InternalSystem::new(InternalSystem::two_level(EPS).unwrap().hamiltonian().clone(), vec![CMatrix::identity(2, 2)])
        .unwrap();
    let generator = assemble(vec![thermal(2)], &sys, &build_laplacian(1, 2), Alpha::Two, 1).unwrap();
    assert!(generator.channels().is_empty());
}

#[test]
fn zero_temperature_ratchet_bath_has_no_absorption() {
    let sys = InternalSystem::ratchet(EPS).unwrap();
    let cold: Arc<dyn RateSource> = Arc::new(BathSpec::smooth_bump(2, 3.0, 1.0, None).unwrap());
    let generator = assemble(vec![cold, thermal(2)], &sys, &build_ratchet(1), Alpha::Two, 2).unwrap();
    let cold_abs: Vec<_> = generator.channels().iter().filter(|c| c.bath == 0 && c.omega > 0.0).collect();
    assert!(!cold_abs.is_empty());
    assert!(cold_abs.iter().all(|c| c.kernel.is_zero()));
    assert!(generator.channels().iter().any(|c| c.bath == 1 && c.omega > 0.0 && !c.kernel.is_zero()));
}

#[test]
fn unitary_evolution_preserves_spectrum() {
    let sys = InternalSystem::new(CMatrix::zeros(1, 1), vec![]).unwrap();
    let generator = assemble(vec![], &sys, &build_laplacian(1, 1), Alpha::Two, 1).unwrap();
    let lat = PeriodicBox::new(1, 9).unwrap();
    let rho = random_state(9, 3);
    let st = LatticeDensityMatrix::from_dense(&sys, lat, &rho, true).unwrap();
    let out = evolve(&generator, &st, 1.0, 0.0025).unwrap().final_state.to_dense();
    let (a, _) = qbm::numerics::linalg::hermitian_eigen(&rho);
    let (b, _) = qbm::numerics::linalg::hermitian_eigen(&out);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9, "{x} {y}");
    }
}

fn translate(rho: &CMatrix, lat: PeriodicBox, n: usize, shift: &[i64]) -> CMatrix {
    let d = rho.nrows();
    let map = |i: usize| lat.shift(i / n, shift) * n + i % n;
    let mut out = CMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            out[(map(r), map(c))] = rho[(r, c)];
        }
    }
    out
}

#[test]
fn evolution_is_translation_covariant() {
    let generator = two_level_generator(2, Alpha::Two, 2);
    let lat = PeriodicBox::new(2, 5).unwrap();
    let rho = random_state(50, 7);
    let shifted = translate(&rho, lat, 2, &[1, -2]);
    let run = |m: &CMatrix| {
        let st = LatticeDensityMatrix::from_dense(generator.system(), lat, m, true).unwrap();
        evolve(&generator, &st, 0.2, 0.005).unwrap().final_state.to_dense()
    };
    let a = translate(&run(&rho), lat, 2, &[1, -2]);
    let b = run(&shifted);
    assert!(max_abs(&(&a - &b)) < 1e-9);
}

#[test]
fn semigroup_composition() {
    let generator = two_level_generator(1, Alpha::Two, 2);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let st = LatticeDensityMatrix::from_dense(generator.system(), lat, &random_state(10, 8), true).unwrap();
    let whole = evolve(&generator, &st, 0.4, 0.01).unwrap().final_state;
    let half = evolve(&generator, &st, 0.2, 0.01).unwrap().final_state;
    let twice = evolve(&generator, &half, 0.2, 0.01).unwrap().final_state;
    assert!(max_abs(&(&whole.to_dense() - &twice.to_dense())) < 1e-12);
}

#[test]
fn oversized_step_is_rejected() {
    let generator = two_level_generator(1, Alpha::Two, 2);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let st = LatticeDensityMatrix::from_dense(generator.system(), lat, &random_state(10, 8), true).unwrap();
    assert!(matches!(evolve(&generator, &st, 1.0, 0.5), Err(LindbladError::StepTooLarge { .. })));
}

#[test]
fn box_must_hold_the_stencil() {
    let generator = two_level_generator(1, Alpha::Two, 3);
    let lat = PeriodicBox::new(1, 5).unwrap();
    let st = LatticeDensityMatrix::from_dense(generator.system(), lat, &random_state(10, 8), true).unwrap();
    assert!(matches!(generator.apply(&st), Err(LindbladError::BoxTooSmall(_))));
}

#[test]
fn thermal_kraus_certificate_passes() {
    let generator = two_level_generator(2, Alpha::Two, 6);
    let report = kraus_certificate(&generator).unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report.channels.len(), 2);
    assert!(report.channels.iter().all(|c| c.points == 169));
}

#[test]
fn non_positive_kernel_fails_certificate() {
    let sys = InternalSystem::two_level(EPS).unwrap();
    let one = Complex64::new(1.0, 0.0);
    let kernel: Arc<dyn RateSource> =
        Arc::new(TabulatedKernel::new("bad", 1, vec![(vec![0], one), (vec![1], -one), (vec![-1], -one)], 0.0));
    let generator = assemble(vec![kernel], &sys, &build_laplacian(1, 2), Alpha::Two, 1).unwrap();
    let report = kraus_certificate(&generator).unwrap();
    assert!(!report.pass);
    assert!(report.channels.iter().all(|c| c.min_eigenvalue < -0.4));
    assert!(kraus_certificate_with_radius(&generator, 0).unwrap().pass);

    let negative: Arc<dyn RateSource> = Arc::new(TabulatedKernel::new("neg", 1, vec![(vec![0], -one)], 0.0));
    let generator = assemble(vec![negative], &sys, &build_laplacian(1, 2), Alpha::Two, 1).unwrap();
    assert!(!kraus_certificate_with_radius(&generator, 0).unwrap().pass);
}

#[test]
fn free_hopping_spreads_ballistically() {
    let sys = InternalSystem::new(CMatrix::zeros(1, 1), vec![]).unwrap();
    let generator = assemble(vec![], &sys, &build_laplacian(1, 1), Alpha::Two, 1).unwrap();
    let lat = PeriodicBox::new(1, 61).unwrap();
    let one = CMatrix::identity(1, 1);
    let rho = LatticeDensityMatrix::localized(&sys, lat, lat.origin(), &one).unwrap();
    let grid: Vec<f64> = (1..=12).map(|i| 0.5 * i as f64).collect();
    let table = msd(&generator, &rho, &grid, 0.01).unwrap();
    for &(t, m) in &table.rows {
        assert!((m - 2.0 * t * t).abs() < 1e-8 * (1.0 + m), "τ={t} {m}");
    }
    assert!((table.late_slope.unwrap().slope - 2.0).abs() < 1e-6);
}

#[test]
fn zero_generator_keeps_msd_constant() {
    let sys = InternalSystem::new(CMatrix::zeros(1, 1), vec![]).unwrap();
    let hop = HoppingSpec::new(1, 1, vec![]).unwrap();
    let generator = assemble(vec![], &sys, &hop, Alpha::AboveTwo, 1).unwrap();
    let lat = PeriodicBox::new(1, 9).unwrap();
    let rho = LatticeDensityMatrix::localized(&sys, lat, lat.site(&[2]), &CMatrix::identity(1, 1)).unwrap();
    let table = msd(&generator, &rho, &[0.5, 1.0, 2.0], 0.1).unwrap();
    assert!(table.rows.iter().all(|r| (r.1 - 4.0).abs() < 1e-15));
}

#[test]
fn free_spreading_hits_small_box() {
    let sys = InternalSystem::new(CMatrix::zeros(1, 1), vec![]).unwrap();
    let generator = assemble(vec![], &sys, &build_laplacian(1, 1), Alpha::Two, 1).unwrap();
    let lat = PeriodicBox::new(1, 11).unwrap();
    let rho = LatticeDensityMatrix::localized(&sys, lat, lat.origin(), &CMatrix::identity(1, 1)).unwrap();
    assert!(matches!(msd(&generator, &rho, &[1.0, 4.0], 0.01), Err(LindbladError::BoxTooSmall(_))));
}

#[test]
fn positivity_spot_checks_are_recorded() {
    let generator = two_level_generator(2, Alpha::Two, 2);
    let lat = PeriodicBox::new(2, 7).unwrap();
    let sigma = CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
    let rho = LatticeDensityMatrix::localized(generator.system(), lat, lat.origin(), &sigma).unwrap();
    let traj = evolve_with(&generator, &rho, EvolveOptions::new(0.5, 0.005)).unwrap();
    assert!(traj.min_eigenvalue > -1e-6);
    assert!(traj.max_asymmetry < 1e-10);
    assert!(!traj.retried);
}
