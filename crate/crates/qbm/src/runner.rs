//! Subcommand execution and artifact writing.
//!
//! Every artifact goes to a temporary file in the output directory and is
//! renamed into place. JSON reports share one envelope carrying the command,
//! crate version, config hash and seed; CSV files start with the same stamp
//! as a `#` comment line. Reports contain no timings, so a rerun with the same
//! config and seed reproduces them byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::{Value, json};
use thiserror::Error;

use crate::CMatrix;
use crate::Complex64;
use crate::bath::{
    BathError, BathSpec, Occupation, RateSource, correlation_table, decay_profile, fit_decay, lamb_shift_weight,
    rate, sup_profile,
};
use crate::config::{Command, ConfigError, DysonMode, ExperimentConfig, InitialState};
use crate::dyson::{
    DysonBox, DysonError, crossing_suppression_scan, scaling_limit_compare, spectral_average_check,
};
use crate::kinetic::{
    JumpRates, KineticError, MomentumDensity, MomentumGrid, RatchetConfig, build_rates, ensemble, evolve_master,
    gillespie, ratchet_current, tv_against_master,
};
use crate::lindblad::{
    EvolveOptions, LatticeDensityMatrix, LindbladError, LindbladGenerator, MAX_STEP_NORM, assemble, evolve_with,
    kraus_certificate,
};
use crate::numerics::fit::fit_power_law;
use crate::particle::{ParticleError, PeriodicBox, build_laplacian, ratchet_bath_1, ratchet_bath_2};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
    #[error(transparent)]
    Dyson(#[from] DysonError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Unsupported(String),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Bath(_) => "bath",
            Self::Particle(_) => "particle",
            Self::Lindblad(_) => "lindblad",
            Self::Kinetic(_) => "kinetic",
            Self::Dyson(_) => "dyson",
            Self::Io { .. } => "io",
            Self::Unsupported(_) => "unsupported",
        }
    }

    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Identifies the run that produced an artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Stamp {
    pub command: String,
    pub version: &'static str,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
}

impl Stamp {
    pub fn new(command: Command, config: Option<&ExperimentConfig>) -> Self {
        Self {
            command: command.name().to_string(),
            version: VERSION,
            config_sha256: config.map(ExperimentConfig::hash),
            seed: config.and_then(|c| c.seed),
        }
    }

    fn comment(&self) -> String {
        format!(
            "# qbm {} {} config_sha256={} seed={}\n",
            self.version,
            self.command,
            self.config_sha256.as_deref().unwrap_or("none"),
            self.seed.map_or("none".to_string(), |s| s.to_string()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// `None` for commands that only tabulate.
    pub pass: Option<bool>,
    pub report: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

/// Writes into `<dir>` via temp file and rename.
pub struct ArtifactWriter {
    dir: PathBuf,
    stamp: Stamp,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, stamp: Stamp) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), stamp, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, RunError> {
        let path = self.dir.join(name);
        let io = |source| RunError::Io { path: path.clone(), source };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io)?;
        }
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// `{stamp..., pass, result}`.
    pub fn report(&mut self, name: &str, pass: Option<bool>, result: Value) -> Result<PathBuf, RunError> {
        let mut doc = serde_json::to_value(&self.stamp).expect("stamp serialises");
        doc["pass"] = json!(pass);
        doc["result"] = result;
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("report serialises");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[String], rows: &[R]) -> Result<PathBuf, RunError> {
        let path = self.dir.join(name);
        let mut buf = self.stamp.comment().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| RunError::Io { path: path.clone(), source: e.into() };
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(row.as_ref()).map_err(fail)?;
            }
            w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
        }
        self.write(name, &buf)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// `<dir>/<command>.error.json` describing a failure.
pub fn write_error(dir: &Path, stamp: Stamp, error: &RunError) -> Result<PathBuf, RunError> {
    let mut w = ArtifactWriter::new(dir, stamp)?;
    let issues = match error {
        RunError::Config(c) => c.issues().to_vec(),
        _ => Vec::new(),
    };
    let name = format!("{}.error.json", w.stamp.command);
    w.report(&name, Some(false), json!({ "kind": error.kind(), "message": error.to_string(), "issues": issues }))
}

/// Runs `command`, writing its artifacts under `config.out_dir`.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.require(command)?;
    let mut w = ArtifactWriter::new(&config.out_dir, Stamp::new(command, Some(config)))?;
    let (pass, report) = match command {
        Command::Correlations => correlations(config, &mut w)?,
        Command::Rates => rates(config, &mut w)?,
        Command::Certify => certify(config, &mut w)?,
        Command::Evolve => evolve(config, &mut w)?,
        Command::Kinetic => kinetic(config, &mut w)?,
        Command::Gillespie => gillespie_run(config, &mut w)?,
        Command::Ratchet => ratchet(config, &mut w)?,
        Command::Dyson => dyson(config, &mut w)?,
        Command::Decay => decay(config, &mut w)?,
    };
    Ok(RunOutcome { pass, report, artifacts: w.written().to_vec() })
}

type Step = Result<(Option<bool>, PathBuf), RunError>;

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn correlations(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.correlations.as_ref().expect("required");
    let mut summary = Vec::new();
    let mut pass = true;
    for label in &plan.baths {
        let spec = &c.baths[label];
        let table = correlation_table(spec, &plan.points, &plan.times)?;
        let mut header = axis_names("x", spec.dimension);
        header.extend(["t", "re_f", "im_f"].map(String::from));
        let mut rows = Vec::new();
        for (p, point) in plan.points.iter().enumerate() {
            for (j, &t) in plan.times.iter().enumerate() {
                let f = table.get(p, j);
                let mut row: Vec<String> = point.iter().map(|x| x.to_string()).collect();
                row.extend([fmt(t), fmt(f.re), fmt(f.im)]);
                rows.push(row);
            }
        }
        w.csv(&format!("correlations_{label}.csv"), &header, &rows)?;
        // |f(x,t)| ≤ f(0,0) for a positive-type correlation.
        let excess = table.bound_excess();
        let ok = excess.is_none_or(|e| e <= c.tolerances.rate);
        pass &= ok;
        summary.push(json!({ "bath": label, "bound_excess": excess, "bounded": ok }));
    }
    let report = w.report("correlations.json", Some(pass), json!({ "baths": summary }))?;
    Ok((Some(pass), report))
}

fn common_beta(baths: &[BathSpec]) -> Option<f64> {
    let betas: Vec<f64> = baths
        .iter()
        .map(|b| match b.occupation {
            Occupation::BoseEinstein { beta } => Some(beta),
            _ => None,
        })
        .collect::<Option<_>>()?;
    let first = *betas.first()?;
    betas.iter().all(|&b| b == first).then_some(first)
}

fn rates(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.rates.as_ref().expect("required");
    let baths = c.coupled_baths();
    let mut header = vec!["bath".to_string()];
    let dim = baths.iter().map(|b| b.dimension).max().unwrap_or(0);
    header.extend(axis_names("x", dim));
    header.extend(["omega", "re_rate", "im_rate"].map(String::from));
    let mut rows = Vec::new();
    let mut lamb = Vec::new();
    for spec in &baths {
        for &omega in &plan.omegas {
            for point in &plan.points {
                let r = rate(spec, point, omega)?;
                let mut row = vec![spec.label.clone()];
                row.extend(point.iter().map(|x| x.to_string()));
                row.extend([fmt(omega), fmt(r.re), fmt(r.im)]);
                rows.push(row);
            }
            let weight = lamb_shift_weight(spec, omega)?;
            lamb.push(json!({ "bath": spec.label, "omega": omega, "value": weight.value, "residual": weight.residual }));
        }
    }
    w.csv("rates.csv", &header, &rows)?;
    let mut result = json!({ "lamb_shift_weights": lamb });
    let mut pass = None;
    if c.system.is_nondegenerate() {
        let jumps = build_rates(&baths, &c.system)?;
        if let Some(beta) = common_beta(&baths) {
            let checks = detailed_balance(&jumps, beta);
            let ok = checks.iter().all(|(_, _, rel)| *rel < c.tolerances.rate);
            pass = Some(ok);
            result["detailed_balance"] = json!(
                checks.iter().map(|(a, b, rel)| json!({ "from": a, "to": b, "relative_error": rel })).collect::<Vec<_>>()
            );
        }
        result["jump_rates"] = serde_json::to_value(&jumps).expect("rates serialise");
    } else {
        result["jump_rates"] = Value::Null;
        result["note"] = json!("S is degenerate; the momentum-space jump process is not defined");
    }
    let report = w.report("rates.json", pass, result)?;
    Ok((pass, report))
}

/// `Γ(a→b)/Γ(b→a)` against `e^{β(E_a − E_b)}` for every connected pair `a > b`.
pub fn detailed_balance(jumps: &JumpRates, beta: f64) -> Vec<(usize, usize, f64)> {
    let n = jumps.levels();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..a {
            let (down, up) = (jumps.rate(a, b), jumps.rate(b, a));
            if down == 0.0 && up == 0.0 {
                continue;
            }
            let expected = (beta * (jumps.energies[a] - jumps.energies[b])).exp();
            out.push((a, b, ((down / up) / expected - 1.0).abs()));
        }
    }
    out
}

fn generator(c: &ExperimentConfig) -> Result<LindbladGenerator, RunError> {
    let baths: Vec<Arc<dyn RateSource>> =
        c.coupled_baths().into_iter().map(|b| Arc::new(b) as Arc<dyn RateSource>).collect();
    Ok(assemble(baths, &c.system, &c.hopping, c.alpha, c.stencil_radius)?)
}

fn initial_state(c: &ExperimentConfig, kind: InitialState) -> Result<LatticeDensityMatrix, RunError> {
    let n = c.system.dim();
    let sigma = match kind {
        InitialState::Ground => {
            let v = c.system.eigenvectors().column(0).into_owned();
            &v * v.adjoint()
        }
        InitialState::Mixed => CMatrix::identity(n, n) * Complex64::new(1.0 / n as f64, 0.0),
    };
    Ok(LatticeDensityMatrix::localized(&c.system, c.lattice, c.lattice.origin(), &sigma)?)
}

/// Largest step the step-size rule allows.
fn max_step(g: &LindbladGenerator, lattice: &PeriodicBox) -> f64 {
    MAX_STEP_NORM / g.norm_estimate(lattice).max(1e-12)
}

fn certify(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let tau = c.certify_tau.expect("required");
    let g = generator(c)?;
    let kraus = kraus_certificate(&g)?;
    let min_eigenvalue = kraus.channels.iter().map(|ch| ch.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let psd = kraus.channels.iter().all(|ch| ch.min_eigenvalue >= -c.tolerances.psd);
    let rho0 = initial_state(c, InitialState::Ground)?;
    let traj = evolve_with(&g, &rho0, EvolveOptions::new(tau, max_step(&g, &c.lattice)))?;
    let drift_per_tau = traj.observations.iter().map(|o| o.trace_drift.abs()).fold(0.0, f64::max) / tau;
    let trace_ok = drift_per_tau < c.tolerances.trace_drift;
    let pass = psd && trace_ok;
    let result = json!({
        "kraus_psd": psd,
        "min_eigenvalue": min_eigenvalue,
        "psd_tolerance": c.tolerances.psd,
        "trace_drift_per_tau": drift_per_tau,
        "trace_drift_tolerance": c.tolerances.trace_drift,
        "trace_preserving": trace_ok,
        "tau": tau,
        "dtau": traj.dtau,
        "evolved_min_eigenvalue": traj.min_eigenvalue,
        "certificate": kraus,
    });
    let report = w.report("certify.json", Some(pass), result)?;
    Ok((Some(pass), report))
}

fn evolve(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.evolve.as_ref().expect("required");
    let g = generator(c)?;
    let rho0 = initial_state(c, plan.initial)?;
    let dtau = plan.dtau.unwrap_or_else(|| max_step(&g, &c.lattice));
    let opts = EvolveOptions { record_every: plan.record_every, ..EvolveOptions::new(plan.tau_final, dtau) };
    let traj = evolve_with(&g, &rho0, opts)?;
    let (n, d) = (c.system.dim(), c.lattice.dim);
    let mut header = vec!["tau".to_string(), "trace_drift".to_string()];
    header.extend(axis_names("population_", n));
    header.extend(axis_names("mean_x_", d));
    header.push("msd".into());
    let rows: Vec<Vec<String>> = traj
        .observations
        .iter()
        .map(|o| {
            let mut row = vec![fmt(o.tau), fmt(o.trace_drift)];
            row.extend(o.populations.iter().map(|&p| fmt(p)));
            row.extend(o.mean_x.iter().map(|&x| fmt(x)));
            row.push(fmt(o.msd));
            row
        })
        .collect();
    w.csv("trajectory.csv", &header, &rows)?;
    let late: Vec<(f64, f64)> = traj
        .observations
        .iter()
        .filter(|o| o.tau >= 0.5 * plan.tau_final && o.tau > 0.0 && o.msd > 0.0)
        .map(|o| (o.tau, o.msd))
        .collect();
    let slope = (late.len() >= 2).then(|| {
        let (t, m): (Vec<f64>, Vec<f64>) = late.into_iter().unzip();
        fit_power_law(&t, &m)
    });
    let last = traj.observations.last().expect("trajectory has observations");
    let result = json!({
        "steps": traj.steps,
        "dtau": traj.dtau,
        "norm_estimate": traj.norm_estimate,
        "final_trace_drift": last.trace_drift,
        "final_populations": last.populations,
        "final_mean_x": last.mean_x,
        "final_msd": last.msd,
        "msd_late_slope": slope,
        "min_eigenvalue": traj.min_eigenvalue,
        "max_asymmetry": traj.max_asymmetry,
        "boundary_population": traj.final_state.boundary_population(),
        "retried": traj.retried,
    });
    let report = w.report("evolve.json", None, result)?;
    Ok((None, report))
}

fn jump_setup(c: &ExperimentConfig) -> Result<(JumpRates, MomentumGrid, MomentumDensity), RunError> {
    let plan = c.kinetic.as_ref().expect("required");
    let jumps = build_rates(&c.coupled_baths(), &c.system)?;
    let grid = MomentumGrid::new(jumps.dim, plan.cells)?;
    let rho0 =
        MomentumDensity::point(grid, jumps.levels(), grid.index_of(&plan.start_momentum), plan.start_level);
    Ok((jumps, grid, rho0))
}

fn kinetic(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.kinetic.as_ref().expect("required");
    let (jumps, grid, rho0) = jump_setup(c)?;
    let traj = evolve_master(&jumps, &rho0, plan.tau_final, plan.dtau, plan.snapshot_every)?;
    let levels = jumps.levels();
    let mut header = vec!["tau".to_string(), "mass_drift".to_string()];
    header.extend(axis_names("level_", levels));
    let rows: Vec<Vec<String>> = traj
        .records
        .iter()
        .map(|r| {
            let mut row = vec![fmt(r.tau), fmt(r.mass_drift)];
            row.extend(r.level_marginals.iter().map(|&p| fmt(p)));
            row
        })
        .collect();
    w.csv("kinetic_levels.csv", &header, &rows)?;
    let mut header = vec!["tau".to_string()];
    header.extend(axis_names("k", grid.dim));
    header.extend(["level", "density"].map(String::from));
    let mut rows = Vec::new();
    for (tau, rho) in &traj.snapshots {
        for s in 0..levels {
            for (idx, &v) in rho.level(s).iter().enumerate() {
                let mut row = vec![fmt(*tau)];
                row.extend(grid.unflatten(idx).into_iter().map(|j| fmt(grid.momentum(j))));
                row.extend([s.to_string(), fmt(v)]);
                rows.push(row);
            }
        }
    }
    w.csv("kinetic_density.csv", &header, &rows)?;
    let last = traj.records.last().expect("trajectory has records");
    let mut result = json!({
        "steps": traj.steps,
        "dtau": traj.dtau,
        "energies": jumps.energies,
        "final_mass_drift": last.mass_drift,
        "final_level_marginals": last.level_marginals,
        "min_density": traj.final_density.min_value(),
    });
    if let Some(beta) = common_beta(&c.coupled_baths()) {
        let weights: Vec<f64> = jumps.energies.iter().map(|e| (-beta * e).exp()).collect();
        let z: f64 = weights.iter().sum();
        result["gibbs_level_marginals"] = json!(weights.iter().map(|x| x / z).collect::<Vec<_>>());
    }
    let report = w.report("kinetic.json", None, result)?;
    Ok((None, report))
}

fn gillespie_run(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let kin = c.kinetic.as_ref().expect("required");
    let plan = c.gillespie.as_ref().expect("required");
    let seed = c.seed.expect("required");
    let (jumps, _, rho0) = jump_setup(c)?;
    let (k0, s0) = (&kin.start_momentum, kin.start_level);
    let samples = ensemble(&jumps, k0, s0, plan.tau_final, plan.trajectories, seed)?;
    let n = samples.len() as f64;
    let levels = jumps.levels();
    let mut fractions = vec![0.0; levels];
    for s in &samples {
        fractions[s.level] += 1.0 / n;
    }
    let stderr: Vec<f64> = fractions.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    let master = evolve_master(&jumps, &rho0, plan.tau_final, kin.dtau, 0)?;
    let tv = tv_against_master(&samples, &master.final_density, plan.tv_bins)?;
    let pass = tv.max < c.tolerances.tv;
    let logs = (0..plan.logged_trajectories)
        .map(|i| gillespie(&jumps, k0, s0, plan.tau_final, seed, i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    if !logs.is_empty() {
        let doc = json!(logs.iter().map(|t| json!({ "events": t.events, "tau_end": t.tau_end })).collect::<Vec<_>>());
        w.report("gillespie_jumps.json", None, doc)?;
    }
    let result = json!({
        "trajectories": plan.trajectories,
        "tau": plan.tau_final,
        "level_fractions": fractions,
        "level_stderr": stderr,
        "master_level_marginals": master.final_density.level_marginals(),
        "tv": tv,
        "tv_tolerance": c.tolerances.tv,
    });
    let report = w.report("gillespie.json", Some(pass), result)?;
    Ok((Some(pass), report))
}

fn ratchet(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.ratchet.as_ref().expect("required");
    let epsilon = c.system.energies().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let expected = crate::particle::InternalSystem::ratchet(epsilon)?;
    if (c.system.hamiltonian() - expected.hamiltonian()).norm() > 1e-12 {
        return Err(RunError::Unsupported("the ratchet command needs the ratchet(ε) internal Hamiltonian".into()));
    }
    let role = |w: &CMatrix| {
        if *w == ratchet_bath_1() {
            Some(0)
        } else if *w == ratchet_bath_2() {
            Some(1)
        } else {
            None
        }
    };
    let roles: Vec<Option<usize>> = c.system.couplings().iter().map(role).collect();
    let baths = c.coupled_baths();
    let (first, second) = match roles.as_slice() {
        [Some(0), Some(1)] => (baths[0].clone(), baths[1].clone()),
        [Some(1), Some(0)] => (baths[1].clone(), baths[0].clone()),
        _ => {
            return Err(RunError::Unsupported(
                "the ratchet command needs one ratchet_bath_1 and one ratchet_bath_2 coupling".into(),
            ));
        }
    };
    let cfg = RatchetConfig {
        epsilon,
        first,
        second,
        swap_couplings: plan.swap,
        side: c.lattice.side,
        tau_final: plan.tau_final,
        dtau: plan.dtau,
        r_trunc: c.stencil_radius,
        window: Default::default(),
    };
    let out = ratchet_current(&cfg)?;
    let rows: Vec<Vec<String>> = out.series.iter().map(|&(t, x)| vec![fmt(t), fmt(x)]).collect();
    w.csv("ratchet_current.csv", &["tau".into(), "mean_x".into()], &rows)?;
    let result = json!({
        "velocity": out.velocity,
        "stderr": out.stderr,
        "zero_within_error": out.is_zero(),
        "nonzero": out.is_nonzero(),
        "swap": plan.swap,
        "first_bath": cfg.first.label,
        "second_bath": cfg.second.label,
        "dtau": out.dtau,
        "trace_drift": out.trace_drift,
        "boundary_population": out.boundary_population,
    });
    let report = w.report("ratchet.json", None, result)?;
    Ok((None, report))
}

fn dyson(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.dyson.as_ref().expect("required");
    let bath = c.baths[&plan.bath].clone();
    let dim = bath.dimension;
    let lattice = PeriodicBox::new(dim, plan.ring_side)?;
    let hopping = build_laplacian(dim, plan.system.dim());
    let system = DysonBox::with_bath_side(lattice, plan.system.clone(), hopping, bath, 1.0, plan.bath_side)?;
    let (pass, result) = match plan.mode {
        DysonMode::Scan => {
            let scan = crossing_suppression_scan(&system, &plan.lambdas, plan.tau, plan.quadrature)?;
            (Some(scan.ratio_decreasing), serde_json::to_value(&scan).expect("scan serialises"))
        }
        DysonMode::Compare => {
            let n = plan.system.dim();
            let mut site = CMatrix::zeros(lattice.sites(), lattice.sites());
            site[(lattice.origin(), lattice.origin())] = Complex64::new(1.0, 0.0);
            let plus = CMatrix::from_element(n, n, Complex64::new(1.0 / n as f64, 0.0));
            let rho0 = site.kronecker(&plus);
            let cmp = scaling_limit_compare(&system, &plan.lambdas, plan.tau, &rho0, plan.n_max, plan.quadrature)?;
            let tails = cmp.rows.iter().all(|r| r.tail_bound < c.tolerances.tail);
            (Some(cmp.deviation_decreasing && tails), serde_json::to_value(&cmp).expect("comparison serialises"))
        }
        DysonMode::Spectral => {
            // X ↦ WX on column-stacked X.
            let n = plan.system.dim();
            let left = CMatrix::identity(n, n).kronecker(plan.system.coupling(0));
            let table = spectral_average_check(&left, &plan.system, &plan.spectral_times)?;
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| json!({ "t": r.t, "deviation": r.deviation, "t_times_deviation": r.t * r.deviation }))
                .collect();
            (None, json!({ "rows": rows }))
        }
    };
    let mut result = result;
    result["mode"] = json!(plan.mode);
    let report = w.report("dyson.json", pass, result)?;
    Ok((pass, report))
}

fn decay(c: &ExperimentConfig, w: &mut ArtifactWriter) -> Step {
    let plan = c.decay.as_ref().expect("required");
    let spec = &c.baths[&plan.bath];
    let rows = decay_profile(spec, &plan.times, plan.box_radius)?;
    let header: Vec<String> =
        ["t", "outer_sup", "outer_argmax", "inner_max", "inner_argmax"].map(String::from).to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt(r.t), fmt(r.outer_sup), fmt(r.outer_argmax), fmt(r.inner_max), fmt(r.inner_argmax)])
        .collect();
    w.csv("decay_profile.csv", &header, &table)?;
    let (lo, hi) = (plan.times[0], *plan.times.last().expect("times"));
    let fit = fit_decay(&rows, lo, hi);
    let d = spec.dimension as f64;
    let mut result = json!({
        "bath": plan.bath,
        "dimension": spec.dimension,
        "box_radius": plan.box_radius,
        "outer_exponent": fit.outer,
        "inner_exponent": fit.inner,
        "outer_expected": -(d - 1.0) / 2.0,
        "inner_expected": -2.0,
    });
    if let Some(label) = &plan.witness {
        let profile = sup_profile(&c.baths[label], &plan.times, plan.box_radius)?;
        let rows: Vec<Vec<String>> = profile.iter().map(|&(t, s)| vec![fmt(t), fmt(s)]).collect();
        w.csv("decay_witness.csv", &["t".into(), "sup".into()], &rows)?;
        let first = profile.first().map_or(0.0, |p| p.1);
        let tail_max = profile.iter().skip(profile.len() / 2).map(|p| p.1).fold(0.0, f64::max);
        result["witness"] = json!({
            "bath": label,
            "sup_at_start": first,
            "late_running_max": tail_max,
            "late_over_start": tail_max / first,
        });
    }
    let report = w.report("decay.json", None, result)?;
    Ok((None, report))
}
