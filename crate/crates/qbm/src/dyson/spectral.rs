use num_complex::Complex64;
use serde::Serialize;

use super::DysonError;
use crate::CMatrix;
use crate::numerics::linalg::{expm, spectral_norm};
use crate::numerics::quad::gauss_legendre;
use crate::particle::InternalSystem;

const NODES: usize = 16;
/// Radians of the fastest Bohr oscillation per quadrature panel.
const PHASE_PER_PANEL: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralAverageRow {
    pub t: f64,
    /// `‖t⁻¹∫₀ᵗ e^{-uB} A e^{uB} du − A♮‖` in the Hilbert–Schmidt operator norm.
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralAverageTable {
    pub rows: Vec<SpectralAverageRow>,
}

/// Matrix of `X ↦ e^{iuS} X e^{-iuS}` on column-stacked `vec(X)`.
fn conjugation(s: &CMatrix, u: f64) -> CMatrix {
    let forward = expm(&(s * Complex64::new(0.0, u)));
    let back = expm(&(s * Complex64::new(0.0, -u)));
    back.transpose().kronecker(&forward)
}

fn check_shape(a: &CMatrix, n: usize) -> Result<(), DysonError> {
    if a.shape() != (n * n, n * n) {
        return Err(DysonError::Invalid(format!("superoperator must be {0}x{0}", n * n)));
    }
    Ok(())
}

/// `t⁻¹∫₀ᵗ e^{-uB} A e^{uB} du` with `B = i[S,·]`.
pub fn time_average(a: &CMatrix, system: &InternalSystem, t: f64) -> Result<CMatrix, DysonError> {
    let n = system.dim();
    check_shape(a, n)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(DysonError::Invalid(format!("averaging time {t} must be positive")));
    }
    let spread = system.bohr_frequencies().iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let panels = ((t * spread / PHASE_PER_PANEL).ceil() as usize).max(1);
    let h = t / panels as f64;
    let rule = gauss_legendre(NODES);
    let s = system.hamiltonian();
    let mut acc = CMatrix::zeros(n * n, n * n);
    for p in 0..panels {
        for (u, w) in rule.mapped(p as f64 * h, (p + 1) as f64 * h) {
            acc += conjugation(s, -u) * a * conjugation(s, u) * Complex64::new(w, 0.0);
        }
    }
    Ok(acc / Complex64::new(t, 0.0))
}

/// `A♮ = Σ_ω P_ω A P_ω` over the Bohr sectors of `S`.
pub fn sector_average(a: &CMatrix, system: &InternalSystem) -> Result<CMatrix, DysonError> {
    let n = system.dim();
    check_shape(a, n)?;
    let mut out = CMatrix::zeros(n * n, n * n);
    for omega in system.bohr_frequencies() {
        let mut p = CMatrix::zeros(n * n, n * n);
        for col in 0..n * n {
            let mut e = CMatrix::zeros(n, n);
            e[(col % n, col / n)] = Complex64::new(1.0, 0.0);
            let image = system.project(omega, &e)?;
            p.set_column(col, &nalgebra::DVector::from_column_slice(image.as_slice()));
        }
        out += &p * a * &p;
    }
    Ok(out)
}

/// Deviation of the finite-time average from `A♮` on each time of `times`.
pub fn spectral_average_check(
    a: &CMatrix,
    system: &InternalSystem,
    times: &[f64],
) -> Result<SpectralAverageTable, DysonError> {
    let target = sector_average(a, system)?;
    let rows = times
        .iter()
        .map(|&t| Ok(SpectralAverageRow { t, deviation: spectral_norm(&(time_average(a, system, t)? - &target)) }))
        .collect::<Result<Vec<_>, DysonError>>()?;
    Ok(SpectralAverageTable { rows })
}
