//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs all eleven; numeric arguments after
//! `--` select a subset, e.g. `cargo test --test acceptance -- 3 7`.

use std::error::Error;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use qbm::CMatrix;
use qbm::Complex64;
use qbm::bath::{BathSpec, Dispersion, FormFactor, Occupation, correlation, rate};
use qbm::config::{Command, ExperimentConfig, parse_str, read_config};
use qbm::dyson::{enumerate_pairings, sector_average};
use qbm::kinetic::{MasterOperator, MomentumDensity, MomentumGrid, RatchetConfig, build_rates, ratchet_current};
use qbm::numerics::linalg::{hermitian_eigen, max_abs};
use qbm::particle::{InternalSystem, PeriodicBox, build_laplacian, jump_components, propagation_bound_scan};
use qbm::runner::run;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<(bool, String), Box<dyn Error>>;

struct Criterion {
    id: u32,
    name: &'static str,
    check: fn(&Path) -> Check,
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "cptp_certificate", check: cptp_certificate },
    Criterion { id: 2, name: "detailed_balance", check: detailed_balance },
    Criterion { id: 3, name: "two_level_prefactor", check: two_level_prefactor },
    Criterion { id: 4, name: "gibbs_stationarity", check: gibbs_stationarity },
    Criterion { id: 5, name: "gillespie_vs_master", check: gillespie_vs_master },
    Criterion { id: 6, name: "decay_exponents", check: decay_exponents },
    Criterion { id: 7, name: "crossing_suppression", check: crossing_suppression },
    Criterion { id: 8, name: "scaling_limit", check: scaling_limit },
    Criterion { id: 9, name: "ratchet_current", check: ratchet },
    Criterion { id: 10, name: "diffusion", check: diffusion },
    Criterion { id: 11, name: "invariant_suites", check: invariants },
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let out = scratch.path().join(c.name);
        let (pass, detail) = match (c.check)(&out) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2} {:<22} {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" }, c.id, c.name);
        failed += usize::from(!pass);
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

fn preset_with(extra: &str, out: &Path) -> Result<ExperimentConfig, Box<dyn Error>> {
    let text = format!("out_dir = {:?}\n{extra}", out);
    Ok(parse_str(&text, "acceptance")?.validate()?)
}

fn report(path: &Path) -> Result<Value, Box<dyn Error>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn cptp_certificate(out: &Path) -> Check {
    let config = preset_with("", out)?;
    let outcome = run(Command::Certify, &config)?;
    let doc = report(&outcome.report)?;
    let r = &doc["result"];
    Ok((
        outcome.pass == Some(true),
        format!("min eigenvalue {:.2e}, drift/τ {:.2e}", num(&r["min_eigenvalue"]), num(&r["trace_drift_per_tau"])),
    ))
}

fn detailed_balance(_: &Path) -> Check {
    let mut worst: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0] {
        let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(beta))?;
        let r = build_rates(&[spec], &InternalSystem::two_level(1.0)?)?;
        worst = worst.max((r.rate(1, 0) / r.rate(0, 1) / beta.exp() - 1.0).abs());
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e}")))
}

fn two_level_prefactor(_: &Path) -> Check {
    let (eps, beta) = (1.0, 1.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut worst: f64 = 0.0;
    for g0 in [0.5, 1.0] {
        let spec = BathSpec::new(
            "flat",
            2,
            Dispersion::Linear,
            FormFactor::Constant { amplitude: g0 },
            Occupation::BoseEinstein { beta },
            3.0,
        )?;
        let c = g0 * g0 / two_pi * (beta * eps / 2.0).exp() / ((beta * eps).exp() - 1.0);
        let down = rate(&spec, &[0, 0], -eps)?.re / (two_pi * eps * c * (beta * eps / 2.0).exp());
        let up = rate(&spec, &[0, 0], eps)?.re / (two_pi * eps * c * (-beta * eps / 2.0).exp());
        worst = worst.max((down - 1.0).abs()).max((up - 1.0).abs());
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e}")))
}

fn gibbs_stationarity(_: &Path) -> Check {
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?;
    let r = build_rates(&[spec], &InternalSystem::two_level(1.0)?)?;
    let grid = MomentumGrid::new(2, 64)?;
    let rho = MomentumDensity::gibbs_uniform(grid, &r.energies, 1.0);
    let d = MasterOperator::new(&r, grid)?.derivative(&rho);
    let norm = d.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((norm < 1e-8, format!("derivative sup norm {norm:.2e}")))
}

fn gillespie_vs_master(out: &Path) -> Check {
    let config = preset_with("seed = 2024\n", out)?;
    let outcome = run(Command::Gillespie, &config)?;
    let doc = report(&outcome.report)?;
    let tv = num(&doc["result"]["tv"]["max"]);
    Ok((outcome.pass == Some(true), format!("max TV {tv:.4} over 10⁴ trajectories")))
}

fn decay_exponents(out: &Path) -> Check {
    let outcome = run(Command::Decay, &preset_with("", out)?)?;
    let r = report(&outcome.report)?["result"].clone();
    let (outer, inner) = (num(&r["outer_exponent"]["slope"]), num(&r["inner_exponent"]["slope"]));
    let witness = num(&r["witness"]["late_over_start"]);
    let pass = (outer + 0.5).abs() <= 0.15 && (inner + 2.0).abs() <= 0.3 && witness >= 0.5;
    Ok((pass, format!("outer {outer:.3}, inner {inner:.3}, d=1 late/start {witness:.2}")))
}

fn crossing_suppression(out: &Path) -> Check {
    let outcome = run(Command::Dyson, &preset_with("", out)?)?;
    let r = report(&outcome.report)?["result"].clone();
    let ratios: Vec<String> = r["rows"].as_array().into_iter().flatten().map(|x| format!("{:.3}", num(&x["ratio"]))).collect();
    Ok((outcome.pass == Some(true), format!("crossing/ladder ratios [{}]", ratios.join(", "))))
}

fn scaling_limit(out: &Path) -> Check {
    let outcome = run(Command::Dyson, &preset_with("[dyson]\nmode = \"compare\"\n", out)?)?;
    let r = report(&outcome.report)?["result"].clone();
    let rows = r["rows"].as_array().cloned().unwrap_or_default();
    let devs: Vec<String> = rows.iter().map(|x| format!("{:.2e}", num(&x["deviation"]))).collect();
    let tail = rows.iter().map(|x| num(&x["tail_bound"])).fold(0.0, f64::max);
    Ok((outcome.pass == Some(true), format!("deviations [{}], max tail {tail:.1e}", devs.join(", "))))
}

fn ratchet(_: &Path) -> Check {
    let run = |beta_first: Option<f64>, swap: bool| -> Result<_, Box<dyn Error>> {
        let mut cfg = RatchetConfig::preset(1.0, beta_first, Some(1.0))?;
        cfg.swap_couplings = swap;
        Ok(ratchet_current(&cfg)?)
    };
    let equal = run(Some(1.0), false)?;
    let driven = run(None, false)?;
    let swapped = run(None, true)?;
    let pass = equal.is_zero()
        && driven.is_nonzero()
        && swapped.is_nonzero()
        && driven.velocity.signum() != swapped.velocity.signum();
    Ok((
        pass,
        format!(
            "v(T₁=T₂) {:.2e}±{:.1e}, v(T₁=0) {:.2e}±{:.1e}, swapped {:.2e}±{:.1e}",
            equal.velocity, equal.stderr, driven.velocity, driven.stderr, swapped.velocity, swapped.stderr
        ),
    ))
}

fn diffusion(out: &Path) -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/diffusion.toml");
    let mut file = read_config(&path)?;
    file.out_dir = Some(out.to_path_buf());
    let outcome = run(Command::Evolve, &file.validate()?)?;
    let r = report(&outcome.report)?["result"].clone();
    let slope = num(&r["msd_late_slope"]["slope"]);
    Ok(((0.8..=1.2).contains(&slope), format!("late MSD slope {slope:.3}, dτ {:.2e}", num(&r["dtau"]))))
}

fn double_factorial(n: usize) -> usize {
    (1..=n).map(|k| 2 * k - 1).product()
}

fn invariants(_: &Path) -> Check {
    let mut failures = Vec::new();

    for n in 1..=4 {
        let pairings = enumerate_pairings(n)?;
        let ladders = pairings.iter().filter(|p| p.is_ladder()).count();
        if pairings.len() != double_factorial(n) || ladders != 1 {
            failures.push(format!("pairings n={n}: {} with {ladders} ladders", pairings.len()));
        }
    }

    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?;
    let origin = correlation(&spec, &[0, 0], 0.0)?.re;
    let mut herm: f64 = 0.0;
    for (x, y, t) in [(0, 0, 0.7), (1, 0, 2.0), (2, -3, -1.5), (4, 1, 5.0), (-5, 2, 8.0)] {
        let f = correlation(&spec, &[x, y], t)?;
        let g = correlation(&spec, &[-x, -y], -t)?;
        herm = herm.max((f.conj() - g).norm() / (1.0 + f.norm()));
        if f.norm() > origin * (1.0 + 1e-6) {
            failures.push(format!("|f({x},{y},{t})| above f(0,0)"));
        }
    }
    if herm > 1e-6 {
        failures.push(format!("hermiticity defect {herm:.1e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut min_eig = f64::INFINITY;
    for &omega in &[-2.0, -1.0, -0.3, 0.3, 1.0, 2.0] {
        let pts: Vec<[i64; 2]> = (0..6).map(|_| [rng.random_range(-5..=5), rng.random_range(-5..=5)]).collect();
        let k = CMatrix::from_fn(6, 6, |a, b| {
            rate(&spec, &[pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]], omega).unwrap_or_default()
        });
        min_eig = min_eig.min(hermitian_eigen(&k).0[0]);
    }
    if min_eig < -1e-8 {
        failures.push(format!("rate kernel eigenvalue {min_eig:.1e}"));
    }

    let sys = InternalSystem::two_level(1.3)?;
    let w = sys.coupling(0);
    let sum = jump_components(&sys, 0).into_iter().fold(CMatrix::zeros(2, 2), |acc, (_, m)| acc + m);
    if max_abs(&(sum - w)) > 1e-12 {
        failures.push("jump components do not sum to W".into());
    }
    let energies = [0.3, -0.9, 1.4];
    let s = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, energies.map(|e| Complex64::new(e, 0.0))));
    let three = InternalSystem::new(s, vec![CMatrix::identity(3, 3)])?;
    let a = CMatrix::from_fn(9, 9, |_, _| Complex64::new(rng.random(), rng.random()));
    let masked = sector_average(&a, &three)?;
    let freq = |i: usize| energies[i % 3] - energies[i / 3];
    let mask = CMatrix::from_fn(9, 9, |r, c| if (freq(r) - freq(c)).abs() < 1e-12 { a[(r, c)] } else { Complex64::default() });
    if max_abs(&(masked - mask)) > 1e-13 {
        failures.push("sector average differs from the frequency mask".into());
    }

    let h = build_laplacian(1, 2);
    let times = [0.5, 1.0, 2.0, 3.0];
    let kappa = |side| -> Result<f64, Box<dyn Error>> {
        Ok(propagation_bound_scan(&h, &sys, 1.0, 0.0, &times, &PeriodicBox::new(1, side)?)?.kappa)
    };
    let (small, large) = (kappa(41)?, kappa(61)?);
    if (small / large - 1.0).abs() >= 0.05 {
        failures.push(format!("κ {small:.4} on 41 vs {large:.4} on 61"));
    }

    let detail = if failures.is_empty() {
        format!("hermiticity {herm:.1e}, kernel min eig {min_eig:.1e}, κ {small:.4}/{large:.4}")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}
