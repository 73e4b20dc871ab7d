use num_complex::Complex64;
use serde::Serialize;

use super::apply::ApplyPlan;
use super::generator::LindbladGenerator;
use super::state::LatticeDensityMatrix;
use super::{LindbladError, BOUNDARY_LIMIT, MAX_ASYMMETRY, MAX_STEP_NORM, POSITIVITY_FLOOR};
use crate::numerics::fit::{fit_power_law, LineFit};

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub tau_final: f64,
    pub dtau: f64,
    /// Record observables every this many steps (the final step is always recorded).
    pub record_every: usize,
    /// Positivity spot check every this many steps; 0 disables it.
    pub positivity_every: usize,
    /// Halve `dτ` and retry once on positivity loss.
    pub retry_on_positivity_loss: bool,
}

impl EvolveOptions {
    pub fn new(tau_final: f64, dtau: f64) -> Self {
        Self { tau_final, dtau, record_every: 1, positivity_every: 10, retry_on_positivity_loss: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Observation {
    pub tau: f64,
    pub trace_drift: f64,
    /// Populations of the eigenvectors of S, in ascending energy.
    pub populations: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub msd: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub observations: Vec<Observation>,
    pub final_state: LatticeDensityMatrix,
    pub dtau: f64,
    pub steps: usize,
    pub norm_estimate: f64,
    pub max_asymmetry: f64,
    /// Smallest eigenvalue met on the spot checks.
    pub min_eigenvalue: f64,
    pub retried: bool,
}

fn observe(rho: &LatticeDensityMatrix, tau: f64) -> Observation {
    Observation {
        tau,
        trace_drift: rho.trace() - 1.0,
        populations: rho.internal_populations(),
        mean_x: rho.mean_position(),
        msd: rho.second_moment(),
    }
}

pub fn evolve(
    generator: &LindbladGenerator,
    rho0: &LatticeDensityMatrix,
    tau_final: f64,
    dtau: f64,
) -> Result<Trajectory, LindbladError> {
    evolve_with(generator, rho0, EvolveOptions::new(tau_final, dtau))
}

pub fn evolve_with(
    generator: &LindbladGenerator,
    rho0: &LatticeDensityMatrix,
    opts: EvolveOptions,
) -> Result<Trajectory, LindbladError> {
    if !(opts.tau_final >= 0.0) || !(opts.dtau > 0.0) {
        return Err(LindbladError::Invalid("need τ_final ≥ 0 and dτ > 0".into()));
    }
    let plan = generator.plan(rho0.lattice())?;
    let norm = generator.norm_estimate(&rho0.lattice());
    let product = opts.dtau * norm;
    if product > MAX_STEP_NORM {
        return Err(LindbladError::StepTooLarge { product, limit: MAX_STEP_NORM });
    }
    match run(&plan, rho0, opts, norm) {
        Err(LindbladError::PositivityLoss { .. }) if opts.retry_on_positivity_loss => {
            let halved = EvolveOptions { dtau: opts.dtau / 2.0, retry_on_positivity_loss: false, ..opts };
            let mut traj = run(&plan, rho0, halved, norm)?;
            traj.retried = true;
            Ok(traj)
        }
        other => other,
    }
}

fn run(
    plan: &ApplyPlan,
    rho0: &LatticeDensityMatrix,
    opts: EvolveOptions,
    norm: f64,
) -> Result<Trajectory, LindbladError> {
    let steps = (opts.tau_final / opts.dtau - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { opts.tau_final / steps as f64 };
    let mut rho = rho0.clone();
    let mut stage = LatticeDensityMatrix::zeros_like(rho0);
    let mut k = LatticeDensityMatrix::zeros_like(rho0);
    let mut acc = LatticeDensityMatrix::zeros_like(rho0);
    let mut observations = vec![observe(&rho, 0.0)];
    let mut max_asymmetry: f64 = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    let c = |x: f64| Complex64::new(x, 0.0);
    for step in 1..=steps {
        let tau = step as f64 * h;
        // Classical RK4 with the running sum kept in `acc`.
        plan.apply_into(&rho, &mut k)?;
        acc.assign_axpy(&rho, c(h / 6.0), &k);
        stage.assign_axpy(&rho, c(h / 2.0), &k);
        plan.apply_into(&stage, &mut k)?;
        acc.axpy(c(h / 3.0), &k);
        stage.assign_axpy(&rho, c(h / 2.0), &k);
        plan.apply_into(&stage, &mut k)?;
        acc.axpy(c(h / 3.0), &k);
        stage.assign_axpy(&rho, c(h), &k);
        plan.apply_into(&stage, &mut k)?;
        acc.axpy(c(h / 6.0), &k);
        std::mem::swap(&mut rho, &mut acc);

        let asymmetry = rho.hermitize();
        max_asymmetry = max_asymmetry.max(asymmetry);
        if asymmetry > MAX_ASYMMETRY {
            return Err(LindbladError::HermiticityLoss { tau, asymmetry });
        }
        if opts.positivity_every > 0 && (step % opts.positivity_every == 0 || step == steps) {
            let m = rho.min_eigenvalue();
            min_eigenvalue = min_eigenvalue.min(m);
            if m < POSITIVITY_FLOOR {
                return Err(LindbladError::PositivityLoss { tau, min_eigenvalue: m });
            }
        }
        if step % opts.record_every.max(1) == 0 || step == steps {
            observations.push(observe(&rho, tau));
        }
    }
    Ok(Trajectory {
        observations,
        final_state: rho,
        dtau: h,
        steps,
        norm_estimate: norm,
        max_asymmetry,
        min_eigenvalue,
        retried: false,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MsdTable {
    /// `(τ, Σ_x |x|² tr ρ_xx)`.
    pub rows: Vec<(f64, f64)>,
    /// Log-log fit over the second half of the grid.
    pub late_slope: Option<LineFit>,
    pub boundary_population: f64,
}

/// Mean squared displacement sampled on `tau_grid` (ascending). Values are read
/// at the nearest RK4 step.
pub fn msd(
    generator: &LindbladGenerator,
    rho0: &LatticeDensityMatrix,
    tau_grid: &[f64],
    dtau: f64,
) -> Result<MsdTable, LindbladError> {
    let tau_final = tau_grid.iter().copied().fold(0.0, f64::max);
    let traj = evolve(generator, rho0, tau_final, dtau)?;
    let boundary = traj.final_state.boundary_population();
    if boundary > BOUNDARY_LIMIT {
        return Err(LindbladError::BoxTooSmall(format!(
            "boundary population {boundary:.3e} exceeds {BOUNDARY_LIMIT:e} at τ={tau_final}"
        )));
    }
    let rows: Vec<(f64, f64)> = tau_grid
        .iter()
        .map(|&t| {
            let obs = traj
                .observations
                .iter()
                .min_by(|a, b| (a.tau - t).abs().total_cmp(&(b.tau - t).abs()))
                .expect("trajectory has observations");
            (t, obs.msd)
        })
        .collect();
    let late: Vec<(f64, f64)> = rows[rows.len() / 2..].iter().copied().filter(|r| r.0 > 0.0 && r.1 > 0.0).collect();
    let late_slope = (late.len() >= 2).then(|| {
        let (t, m): (Vec<f64>, Vec<f64>) = late.into_iter().unzip();
        fit_power_law(&t, &m)
    });
    Ok(MsdTable { rows, late_slope, boundary_population: boundary })
}
