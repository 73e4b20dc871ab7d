use qbm::bath::{BathSpec, Dispersion, FormFactor, Occupation};
use qbm::dyson::{
    crossing_suppression_scan, dyson_propagator, enumerate_pairings, pair_reordering_sides, scaling_limit_compare,
    sector_average, spectral_average_check, DysonBox, DysonError, DysonTerm, Pairing, QuadratureGrid, SeriesEvaluator,
    Side,
};
use qbm::lindblad::{unvec, vec_of};
use qbm::numerics::linalg::{expm, max_abs};
use qbm::numerics::quad::gauss_legendre;
use qbm::particle::{build_laplacian, sigma_x, InternalSystem, PeriodicBox};
use qbm::{CMatrix, Complex64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 2.0;
const SCAN: [f64; 4] = [0.5, 0.35, 0.25, 0.18];

fn bath(amplitude: f64, cutoff: f64) -> BathSpec {
    BathSpec::new(
        "ring",
        1,
        Dispersion::Linear,
        FormFactor::AcousticBump { amplitude },
        Occupation::BoseEinstein { beta: 1.0 },
        cutoff,
    )
    .unwrap()
}

fn ring(sites: usize, system: InternalSystem, spec: BathSpec, lambda: f64) -> DysonBox {
    DysonBox::new(PeriodicBox::new(1, sites).unwrap(), system, build_laplacian(1, 2), spec, lambda).unwrap()
}

fn weak_ring(lambda: f64) -> DysonBox {
    ring(5, InternalSystem::two_level(EPS).unwrap(), bath(0.05, 2.0), lambda)
}

/// Five-site ring inside a 24-site bath torus, so the pair correlation decays
/// well before it recurs at the scanned times.
fn scan_ring(lambda: f64) -> DysonBox {
    DysonBox::with_bath_side(
        PeriodicBox::new(1, 5).unwrap(),
        InternalSystem::two_level(1.5).unwrap(),
        build_laplacian(1, 2),
        bath(0.04, 1.0),
        lambda,
        24,
    )
    .unwrap()
}

fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a + a.adjoint()
}

fn random_state(dim: usize, seed: u64) -> CMatrix {
    let h = random_hermitian(dim, seed);
    let p = &h * &h;
    let tr = p.trace();
    p / tr
}

fn e(dim: usize, i: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, i)] = Complex64::new(1.0, 0.0);
    m
}

#[test]
fn first_order_single_conjugation_matches_hand_built_superoperator() {
    // Three sites, N = 2: the 6×6 box Hamiltonian and the 36×36 superoperator by hand.
    let lambda = 0.4;
    let system = InternalSystem::two_level(1.3).unwrap();
    let db = ring(3, system, bath(0.7, 3.0), lambda);
    let (site, t) = (1usize, 0.6);
    let term = DysonTerm::new(lambda, Pairing::ladder(1), vec![t, t], vec![site, site], vec![Side::Left, Side::Right])
        .unwrap();
    let value = term.evaluate(&db).unwrap();

    let s = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(0.65, 0.0),
        Complex64::new(-0.65, 0.0),
    ]));
    let c = |v: f64| Complex64::new(v, 0.0);
    let hop_sites = CMatrix::from_row_slice(3, 3, &[c(2.0), c(-1.0), c(-1.0), c(-1.0), c(2.0), c(-1.0), c(-1.0), c(-1.0), c(2.0)]);
    let id2 = CMatrix::identity(2, 2);
    let id3 = CMatrix::identity(3, 3);
    let h = hop_sites.kronecker(&id2) * c(lambda * lambda) + id3.kronecker(&s);
    let u = expm(&(&h * Complex64::new(0.0, -t)));
    let v = u.adjoint() * e(3, site).kronecker(&sigma_x()) * &u;
    // f(0,0) on the 3-ring: the two modes |q| = 2π/3.
    let f00 = {
        let spec = bath(0.7, 3.0);
        let k = 2.0 * std::f64::consts::PI / 3.0;
        2.0 * (spec.absorption_weight(k) + spec.emission_weight(k)) / 3.0
    };
    assert!(f00 > 0.01);
    let expected = v.transpose().kronecker(&v) * Complex64::new(lambda * lambda * f00, 0.0);
    assert!(max_abs(&(value.superoperator() - &expected)) < 1e-13);
    assert!(value.norm() <= value.bound * (1.0 + 1e-12));
}

#[test]
fn zero_coupling_term_vanishes() {
    let system = InternalSystem::new(
        InternalSystem::two_level(1.0).unwrap().hamiltonian().clone(),
        vec![CMatrix::zeros(2, 2)],
    )
    .unwrap();
    let db = ring(3, system, bath(0.5, 3.0), 0.5);
    let term = DysonTerm::new(
        0.5,
        Pairing::ladder(2),
        vec![0.1, 0.2, 0.4, 0.9],
        vec![0, 1, 2, 0],
        vec![Side::Left, Side::Right, Side::Left, Side::Left],
    )
    .unwrap();
    assert_eq!(max_abs(&term.evaluate(&db).unwrap().superoperator()), 0.0);
}

#[test]
fn per_term_bound_holds_on_random_terms() {
    let db = ring(3, InternalSystem::two_level(1.0).unwrap(), bath(0.8, 3.0), 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3 {
        for pairing in enumerate_pairings(n).unwrap() {
            let mut times: Vec<f64> = (0..2 * n).map(|_| 4.0 * rng.random::<f64>()).collect();
            times.sort_by(f64::total_cmp);
            let sites = (0..2 * n).map(|_| rng.random_range(0..3usize)).collect();
            let sides = (0..2 * n).map(|_| if rng.random::<bool>() { Side::Left } else { Side::Right }).collect();
            let term = DysonTerm::new(0.6, pairing, times, sites, sides).unwrap();
            let v = term.evaluate(&db).unwrap();
            assert!(v.norm() <= v.bound * (1.0 + 1e-10));
        }
    }
}

#[test]
fn zero_coupling_constant_gives_identity() {
    let db = weak_ring(0.0);
    let p = dyson_propagator(&db, 3.0, 2, QuadratureGrid::default()).unwrap();
    let id = CMatrix::identity(100, 100);
    assert!(max_abs(&(p.superoperator - id)) < 1e-14);
    assert_eq!(p.tail_bound, 0.0);
}

#[test]
fn first_order_matches_direct_double_integral() {
    let lambda = 0.3;
    let t = 1.5;
    let db = ring(3, InternalSystem::two_level(1.1).unwrap(), bath(0.6, 3.0), lambda);
    let rho = random_state(6, 3);
    let ev = SeriesEvaluator::new(&db, t, QuadratureGrid::default()).unwrap();
    let series = ev.order_apply(1, &rho).unwrap();

    // Direct: -λ² Σ_{x,y,l,l'} ∫_0^t dt2 ∫_0^{t2} dt1 ℐ(y,t2,l')ℐ(x,t1,l)ρ f(y-x, t2-t1, l).
    let rule = gauss_legendre(40);
    let mut direct = CMatrix::zeros(6, 6);
    for (t2, w2) in rule.mapped(0.0, t) {
        for (t1, w1) in rule.mapped(0.0, t2) {
            for x in 0..3 {
                let vx = db.heisenberg(&db.site_coupling(x), t1);
                for y in 0..3 {
                    let vy = db.heisenberg(&db.site_coupling(y), t2);
                    let f = db.correlation(&db.separation(x, y), t2 - t1).unwrap();
                    for (first, fl) in [(&vx * &rho, f), (-(&rho * &vx), f.conj())] {
                        let both = &vy * &first - &first * &vy;
                        direct += both * (fl * (w1 * w2));
                    }
                }
            }
        }
    }
    direct *= Complex64::new(-lambda * lambda, 0.0);
    assert!(max_abs(&(series - direct)) < 1e-6);
}

#[test]
fn partial_sums_preserve_trace_and_hermiticity() {
    let db = weak_ring(0.35);
    let t = 0.5 / (0.35 * 0.35);
    let p = dyson_propagator(&db, t, 2, QuadratureGrid::default()).unwrap();
    for seed in 0..3 {
        let rho = random_state(10, seed);
        let out = p.apply(&rho);
        assert!((out.trace() - Complex64::new(1.0, 0.0)).norm() < p.tail_bound.max(1e-12));
        assert!(max_abs(&(&out - out.adjoint())) < 1e-10);
    }
    for order in &p.orders[1..] {
        let tr = (0..10).map(|i| unvec(&(order * vec_of(&e(10, i))), 10).trace().norm()).fold(0.0, f64::max);
        assert!(tr < 1e-12);
    }
}

#[test]
fn large_majorant_is_rejected() {
    let db = ring(5, InternalSystem::two_level(EPS).unwrap(), bath(0.5, 2.0), 0.5);
    let err = dyson_propagator(&db, 4.0, 2, QuadratureGrid::default()).unwrap_err();
    assert!(matches!(err, DysonError::TailTooLarge { .. }));
}

#[test]
fn pair_reordering_identity_on_exponentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let rates: Vec<(f64, f64)> = (0..2).map(|_| (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let g = |args: &[(f64, f64)]| -> f64 {
            args.iter().zip(&rates).map(|(&(u, v), &(a, b))| (a * u + b * v).exp()).product()
        };
        let (lhs, rhs) = pair_reordering_sides(2, 0.2, 1.7, 10, g).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs(), "{lhs} vs {rhs}");
    }
}

#[test]
fn crossing_diagrams_are_suppressed() {
    let scan = crossing_suppression_scan(&scan_ring(1.0), &SCAN, 0.5, QuadratureGrid::default()).unwrap();
    assert!(scan.ratio_decreasing, "{:?}", scan.rows);
    assert!(scan.rows[0].ratio > 0.1, "no suppression expected at λ = 0.5: {}", scan.rows[0].ratio);
    for row in &scan.rows {
        for &c in &row.crossing_norms {
            assert!(c.is_finite() && c <= row.majorant, "{c} above {}", row.majorant);
        }
    }
}

#[test]
fn scaling_limit_is_approached() {
    let rho0 = {
        let plus = CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        e(5, 2).kronecker(&plus)
    };
    let cmp = scaling_limit_compare(&scan_ring(1.0), &SCAN, 0.5, &rho0, 2, QuadratureGrid::default()).unwrap();
    assert!(cmp.deviation_decreasing, "{:?}", cmp.rows);
    assert!(cmp.rows.iter().all(|r| r.tail_bound < 1e-3));
}

#[test]
fn crossings_persist_when_the_bath_shares_the_ring() {
    // Two bath modes: the box correlation never decays, so neither do crossings.
    let lambdas = [0.5, 0.35, 0.25];
    let scan = crossing_suppression_scan(&weak_ring(1.0), &lambdas, 0.5, QuadratureGrid::default()).unwrap();
    assert!(!scan.ratio_decreasing, "{:?}", scan.rows);
}

#[test]
fn uncoupled_scaling_limit_is_free_evolution() {
    let system = InternalSystem::new(
        InternalSystem::two_level(EPS).unwrap().hamiltonian().clone(),
        vec![CMatrix::zeros(2, 2)],
    )
    .unwrap();
    let db = ring(5, system, bath(0.05, 2.0), 1.0);
    let rho0 = random_state(10, 9);
    let cmp = scaling_limit_compare(&db, &[0.18], 0.5, &rho0, 2, QuadratureGrid::default()).unwrap();
    assert!(cmp.rows[0].deviation < 1e-8, "{}", cmp.rows[0].deviation);
}

fn left_multiplication(a: &CMatrix) -> CMatrix {
    CMatrix::identity(a.nrows(), a.nrows()).kronecker(a)
}

#[test]
fn spectral_average_of_commuting_superoperator_is_exact() {
    let system = InternalSystem::two_level(1.5).unwrap();
    let a = left_multiplication(system.hamiltonian()) * Complex64::new(0.3, 0.2);
    let table = spectral_average_check(&a, &system, &[0.7, 3.0, 11.0]).unwrap();
    assert!(table.rows.iter().all(|r| r.deviation < 1e-12));
}

#[test]
fn spectral_average_deviation_decays_like_inverse_time() {
    let eps = 1.5;
    let system = InternalSystem::two_level(eps).unwrap();
    let a = left_multiplication(&sigma_x());
    // |1 - e^{iεt}| = |1 - e^{2iεt}| at εt = 2π/3, so the ratio is exactly 2.
    let t = 2.0 * std::f64::consts::PI / (3.0 * eps);
    let table = spectral_average_check(&a, &system, &[t, 2.0 * t]).unwrap();
    let closed = |t: f64| (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, eps * t)).norm() / (eps * t);
    assert!((table.rows[0].deviation - closed(t)).abs() < 1e-10);
    assert!((table.rows[0].deviation / table.rows[1].deviation - 2.0).abs() < 1e-9);
}

#[test]
fn sector_average_is_the_frequency_mask() {
    let energies = [0.3, -0.9, 1.4];
    let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, energies.iter().map(|&x| Complex64::new(x, 0.0))));
    let system = InternalSystem::new(s, vec![CMatrix::identity(3, 3)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = CMatrix::from_fn(9, 9, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
    let averaged = sector_average(&a, &system).unwrap();
    let freq = |idx: usize| energies[idx % 3] - energies[idx / 3];
    for r in 0..9 {
        for c in 0..9 {
            let keep = (freq(r) - freq(c)).abs() < 1e-12;
            let expected = if keep { a[(r, c)] } else { Complex64::new(0.0, 0.0) };
            assert!((averaged[(r, c)] - expected).norm() < 1e-13);
        }
    }
}
