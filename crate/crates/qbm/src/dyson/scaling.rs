use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::model::DysonBox;
use super::pairing::enumerate_pairings;
use super::series::{QuadratureGrid, SeriesEvaluator, TimeGrid, dyson_apply};
use super::DysonError;
use crate::CMatrix;
use crate::bath::{FiniteVolumeBath, RateSource};
use crate::lindblad::{Alpha, assemble, dense_generator, unvec, vec_of};
use crate::numerics::fit::fit_power_law;
use crate::numerics::linalg::{expm, spectral_norm, trace_norm};

/// Hilbert–Schmidt operator norm of a superoperator matrix.
pub fn superoperator_norm(m: &CMatrix) -> f64 {
    spectral_norm(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingRow {
    pub lambda: f64,
    pub time: f64,
    pub ladder_norm: f64,
    /// Norms of the non-ladder pairings, in enumeration order.
    pub crossing_norms: Vec<f64>,
    pub crossing_norm: f64,
    pub ratio: f64,
    /// Majorant of each non-ladder contribution.
    pub majorant: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingScan {
    pub tau: f64,
    pub rows: Vec<CrossingRow>,
    pub ratio_decreasing: bool,
}

/// Second-order ladder and non-ladder contributions at `t = λ⁻²τ` for each λ.
pub fn crossing_suppression_scan(
    system: &DysonBox,
    lambdas: &[f64],
    tau: f64,
    quadrature: QuadratureGrid,
) -> Result<CrossingScan, DysonError> {
    check_lambdas(lambdas)?;
    let pairings = enumerate_pairings(2)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = system.with_lambda(lambda)?;
        let t = tau / (lambda * lambda);
        let ev = SeriesEvaluator::new(&scaled, t, quadrature)?;
        let mut ladder_norm = 0.0;
        let mut crossing_norms = Vec::new();
        for p in &pairings {
            let norm = superoperator_norm(&ev.pairing_superoperator(p)?);
            if p.is_ladder() {
                ladder_norm = norm;
            } else {
                crossing_norms.push(norm);
            }
        }
        let crossing_norm = crossing_norms.iter().sum::<f64>();
        rows.push(CrossingRow {
            lambda,
            time: t,
            ladder_norm,
            crossing_norm,
            crossing_norms,
            ratio: crossing_norm / ladder_norm,
            majorant: crossing_majorant(&scaled, t)?,
            nodes: ev.node_count(),
        });
    }
    let ratio_decreasing = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    Ok(CrossingScan { tau, rows, ratio_decreasing })
}

/// Bound on one second-order non-ladder contribution at time `t`:
/// `16‖W‖⁴|Λ|² λ⁴ ‖F‖₁ ∫₀ᵗ da ∫₀ᵃ db ∫_b^a F`, with `F(s) = Σ_x |f^Λ(x,s)|`
/// and `‖F‖₁` taken over `[0, t]`.
pub fn crossing_majorant(system: &DysonBox, t: f64) -> Result<f64, DysonError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    // Every separation `y − x` between box sites, so Σ_y |f(y − x)| ≤ F for each x.
    let mut displacements: Vec<Vec<i64>> = Vec::new();
    for y in 0..system.lattice.sites() {
        let d = system.separation(0, y);
        let back: Vec<i64> = d.iter().map(|v| -v).collect();
        for sep in [d, back] {
            if !displacements.contains(&sep) {
                displacements.push(sep);
            }
        }
    }
    // |f| has kinks, so the panels are much finer than the oscillation scale.
    let panels = ((t * system.frequency_scale() / 0.25).ceil() as usize).max(4);
    let grid = TimeGrid::new(t, panels, 8);
    let scalar = |v: f64| CMatrix::from_element(1, 1, Complex64::new(v, 0.0));
    let mut envelope = Vec::with_capacity(grid.nodes.len());
    for &s in &grid.nodes {
        let mut acc = 0.0;
        for x in &displacements {
            acc += system.correlation(x, s)?.norm();
        }
        envelope.push(scalar(acc));
    }
    let (primitive, l1) = grid.integrate(&envelope);
    let (second, _) = grid.integrate(&primitive);
    let inner: Vec<CMatrix> = grid
        .nodes
        .iter()
        .zip(primitive.iter().zip(&second))
        .map(|(&a, (g, h))| scalar(a * g[(0, 0)].re - h[(0, 0)].re))
        .collect();
    let (_, outer) = grid.integrate(&inner);
    let sites = system.lattice.sites() as f64;
    let lambda4 = system.lambda.powi(4);
    Ok(16.0 * system.coupling_norm().powi(4) * sites * sites * lambda4 * l1[(0, 0)].re * outer[(0, 0)].re)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub lambda: f64,
    pub time: f64,
    pub deviation: f64,
    pub tail_bound: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingComparison {
    pub tau: f64,
    pub n_max: usize,
    pub rows: Vec<ScalingRow>,
    pub deviation_decreasing: bool,
    /// Slope of `log deviation` against `log λ`; reported, not asserted.
    pub fitted_order: Option<f64>,
}

/// Trace-norm distance between the S-interaction-picture Dyson sum at
/// `t = λ⁻²τ` and `e^{τL♮}ρ₀`, with `L♮` built from the same box correlation.
pub fn scaling_limit_compare(
    system: &DysonBox,
    lambdas: &[f64],
    tau: f64,
    rho0: &CMatrix,
    n_max: usize,
    quadrature: QuadratureGrid,
) -> Result<ScalingComparison, DysonError> {
    check_lambdas(lambdas)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(DysonError::Invalid(format!("τ = {tau} must lie in (0, 1]")));
    }
    let limit = limit_state(system, tau, rho0)?;
    let d = system.dim();
    let sites = CMatrix::identity(system.lattice.sites(), system.lattice.sites());
    let s_box = sites.kronecker(system.system.hamiltonian());
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = system.with_lambda(lambda)?;
        let t = tau / (lambda * lambda);
        let out = dyson_apply(&scaled, t, n_max, quadrature, rho0)?;
        // Undo the H_P picture, then enter the S picture.
        let back = scaled.propagator(t);
        let rotate = expm(&(&s_box * Complex64::new(0.0, t))) * back;
        let state = &rotate * &out.state * rotate.adjoint();
        debug_assert_eq!(state.nrows(), d);
        rows.push(ScalingRow {
            lambda,
            time: t,
            deviation: trace_norm(&(state - &limit)),
            tail_bound: out.tail_bound,
            nodes: out.nodes,
        });
    }
    let deviation_decreasing = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    let fitted_order = (rows.len() >= 2 && rows.iter().all(|r| r.deviation > 0.0)).then(|| {
        let x: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
        fit_power_law(&x, &y).slope
    });
    Ok(ScalingComparison { tau, n_max, rows, deviation_decreasing, fitted_order })
}

/// `e^{τL♮}ρ₀` with the finite-volume generator on the same box.
fn limit_state(system: &DysonBox, tau: f64, rho0: &CMatrix) -> Result<CMatrix, DysonError> {
    if rho0.shape() != (system.dim(), system.dim()) {
        return Err(DysonError::Invalid("state does not match the box".into()));
    }
    let bath: Arc<dyn RateSource> = Arc::new(FiniteVolumeBath::new(system.bath.clone(), system.bath_side));
    let generator = assemble(vec![bath], &system.system, &system.hopping, Alpha::Two, 1)?;
    let l = dense_generator(&generator, system.lattice)?;
    let evolved = expm(&(l * Complex64::new(tau, 0.0))) * vec_of(rho0);
    Ok(unvec(&evolved, system.dim()))
}

fn check_lambdas(lambdas: &[f64]) -> Result<(), DysonError> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(DysonError::Invalid("λ values must be positive".into()));
    }
    Ok(())
}
