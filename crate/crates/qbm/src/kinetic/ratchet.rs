use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::KineticError;
use crate::bath::{BathSpec, RateSource};
use crate::lindblad::{
    assemble_with, evolve_with, Alpha, AssembleOptions, EvolveOptions, KernelWindow, LatticeDensityMatrix,
    LindbladError, BOUNDARY_LIMIT, MAX_STEP_NORM,
};
use crate::numerics::fit::fit_line;
use crate::particle::{build_ratchet, ratchet_bath_1, ratchet_bath_2, InternalSystem, PeriodicBox};
use crate::CMatrix;

/// Four-level ratchet on a one-dimensional lattice coupled to two baths.
#[derive(Debug, Clone)]
pub struct RatchetConfig {
    pub epsilon: f64,
    /// Bath coupled through the first ratchet coupling.
    pub first: BathSpec,
    /// Bath coupled through the second ratchet coupling.
    pub second: BathSpec,
    pub swap_couplings: bool,
    pub side: usize,
    pub tau_final: f64,
    /// Defaults to 0.9 of the largest admissible step.
    pub dtau: Option<f64>,
    pub r_trunc: i64,
    pub window: KernelWindow,
}

impl RatchetConfig {
    /// Smooth-bump baths in d = 2 with inverse temperatures `beta_first`
    /// and `beta_second` (`None` is zero temperature).
    pub fn preset(epsilon: f64, beta_first: Option<f64>, beta_second: Option<f64>) -> Result<Self, KineticError> {
        Ok(Self {
            epsilon,
            first: BathSpec::smooth_bump(2, 3.0 * epsilon, 1.0, beta_first)?.with_label("first"),
            second: BathSpec::smooth_bump(2, 3.0 * epsilon, 1.0, beta_second)?.with_label("second"),
            swap_couplings: false,
            side: 31,
            tau_final: 20.0,
            dtau: None,
            r_trunc: 8,
            window: KernelWindow::default(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatchetReport {
    /// `d⟨X·e₁⟩/dτ` from a line fit over the second half of the run.
    pub velocity: f64,
    pub stderr: f64,
    /// `(τ, ⟨X·e₁⟩)`.
    pub series: Vec<(f64, f64)>,
    pub dtau: f64,
    pub trace_drift: f64,
    pub boundary_population: f64,
}

/// Absolute floor below which a fitted velocity counts as zero.
pub const ZERO_CURRENT_FLOOR: f64 = 1e-12;

impl RatchetReport {
    pub fn is_zero(&self) -> bool {
        self.velocity.abs() <= 3.0 * self.stderr + ZERO_CURRENT_FLOOR
    }

    pub fn is_nonzero(&self) -> bool {
        self.velocity.abs() > 5.0 * self.stderr + ZERO_CURRENT_FLOOR
    }
}

pub fn ratchet_current(cfg: &RatchetConfig) -> Result<RatchetReport, KineticError> {
    let (w1, w2) = if cfg.swap_couplings {
        (ratchet_bath_2(), ratchet_bath_1())
    } else {
        (ratchet_bath_1(), ratchet_bath_2())
    };
    let sys = InternalSystem::ratchet(cfg.epsilon)?.with_couplings(vec![w1, w2])?;
    let baths: Vec<Arc<dyn RateSource>> = vec![Arc::new(cfg.first.clone()), Arc::new(cfg.second.clone())];
    let opts = AssembleOptions { window: cfg.window, ..AssembleOptions::default() };
    let generator = assemble_with(baths, &sys, &build_ratchet(1), Alpha::Two, cfg.r_trunc, opts)?;
    let lattice = PeriodicBox::new(1, cfg.side)?;
    let dtau = match cfg.dtau {
        Some(d) => d,
        None => 0.9 * MAX_STEP_NORM / generator.norm_estimate(&lattice).max(1e-12),
    };
    let mixed = CMatrix::identity(4, 4) * Complex64::new(0.25, 0.0);
    let rho0 = LatticeDensityMatrix::localized(&sys, lattice, lattice.origin(), &mixed)?;
    let traj = evolve_with(&generator, &rho0, EvolveOptions::new(cfg.tau_final, dtau))?;
    let boundary = traj.final_state.boundary_population();
    if boundary > BOUNDARY_LIMIT {
        return Err(LindbladError::BoxTooSmall(format!("boundary population {boundary:.3e}")).into());
    }
    let series: Vec<(f64, f64)> = traj.observations.iter().map(|o| (o.tau, o.mean_x[0])).collect();
    let late: Vec<&(f64, f64)> = series.iter().filter(|(t, _)| *t >= 0.5 * cfg.tau_final).collect();
    if late.len() < 3 {
        return Err(KineticError::Invalid("too few samples in the fit window".into()));
    }
    let (t, x): (Vec<f64>, Vec<f64>) = late.into_iter().copied().unzip();
    let fit = fit_line(&t, &x);
    Ok(RatchetReport {
        velocity: fit.slope,
        stderr: fit.slope_stderr,
        series,
        dtau: traj.dtau,
        trace_drift: traj.observations.last().map_or(0.0, |o| o.trace_drift),
        boundary_population: boundary,
    })
}
