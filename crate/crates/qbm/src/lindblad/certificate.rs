use serde::Serialize;

use super::generator::{embed, KernelWindow, LindbladGenerator, TruncationWarning};
use super::LindbladError;
use crate::bath::{RateSource, TOL_PSD};
use crate::numerics::linalg::min_hermitian_eigenvalue;
use crate::particle::PeriodicBox;
use crate::CMatrix;

#[derive(Debug, Clone, Serialize)]
pub struct ChannelCertificate {
    pub bath: String,
    pub omega: f64,
    pub stencil_radius: i64,
    pub points: usize,
    pub min_eigenvalue: f64,
    /// Smallest Fourier value of the kernel actually used by the generator.
    pub applied_min_symbol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KrausReport {
    pub pass: bool,
    pub tolerance: f64,
    pub channels: Vec<ChannelCertificate>,
    /// Largest entry of `Υ - Υ†`.
    pub lamb_asymmetry: f64,
    /// Largest entry of `[Υ, S]`.
    pub lamb_commutator: f64,
    pub window: KernelWindow,
    pub truncation_warnings: Vec<TruncationWarning>,
}

/// Minimum eigenvalue of the Gram matrix `[c(x_a - x_b, ω)]` over the stencil
/// `|x|∞ ≤ radius` (plain offsets, no periodic wrapping).
pub fn stencil_min_eigenvalue(
    source: &dyn RateSource,
    lattice_dim: usize,
    radius: i64,
    omega: f64,
) -> Result<f64, LindbladError> {
    let points = PeriodicBox::stencil(lattice_dim, radius);
    let diffs = PeriodicBox::stencil(lattice_dim, 2 * radius);
    let embedded: Vec<Vec<i64>> = diffs.iter().map(|o| embed(o, source.dimension())).collect();
    let values = source.rates(&embedded, omega)?;
    let side = (4 * radius + 1) as usize;
    let index = |d: &[i64]| d.iter().fold(0usize, |acc, &c| acc * side + (c + 2 * radius) as usize);
    let m = points.len();
    let gram = CMatrix::from_fn(m, m, |a, b| {
        let d: Vec<i64> = points[a].iter().zip(&points[b]).map(|(x, y)| x - y).collect();
        values[index(&d)]
    });
    Ok(min_hermitian_eigenvalue(&crate::numerics::linalg::hermitian_part(&gram)))
}

pub fn kraus_certificate(generator: &LindbladGenerator) -> Result<KrausReport, LindbladError> {
    kraus_certificate_with_radius(generator, generator.r_trunc)
}

pub fn kraus_certificate_with_radius(generator: &LindbladGenerator, radius: i64) -> Result<KrausReport, LindbladError> {
    let mut channels = Vec::new();
    for ch in &generator.channels {
        let source = generator.baths[ch.bath].as_ref();
        let min = stencil_min_eigenvalue(source, generator.lattice_dim, radius, ch.omega)?;
        let points = (2 * radius + 1).pow(generator.lattice_dim as u32) as usize;
        channels.push(ChannelCertificate {
            bath: source.label().to_string(),
            omega: ch.omega,
            stencil_radius: radius,
            points,
            min_eigenvalue: min,
            applied_min_symbol: ch.kernel.min_symbol(),
            pass: min >= -TOL_PSD,
        });
    }
    let (lamb_asymmetry, lamb_commutator) = generator.lamb_residuals();
    let pass = channels.iter().all(|c| c.pass) && lamb_asymmetry <= 1e-12 && lamb_commutator <= 1e-12;
    Ok(KrausReport {
        pass,
        tolerance: TOL_PSD,
        channels,
        lamb_asymmetry,
        lamb_commutator,
        window: generator.window,
        truncation_warnings: generator.warnings.clone(),
    })
}
