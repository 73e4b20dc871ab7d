use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::LindbladError;
use crate::bath::{BathError, RateSource};
use crate::numerics::linalg::{commutator, hermitian_eigen, max_abs, spectral_norm};
use crate::particle::{jump_components, spectral_average_hopping, HoppingSpec, InternalSystem, PeriodicBox};
use crate::CMatrix;

/// Scaling exponent of the hopping term: α = 2 keeps the averaged hopping,
/// any α > 2 drops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alpha {
    Two,
    AboveTwo,
}

/// Rate kernel `δ ↦ c(δ, ω)` on the stencil `|δ|∞ ≤ radius` (lattice offsets).
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    pub radius: i64,
    pub offsets: Vec<Vec<i64>>,
    pub values: Vec<Complex64>,
}

impl KernelTable {
    /// `min_k Σ_δ c(δ) e^{-ik·δ}` over a grid of `(4R+2)^d` momenta; negative
    /// values mean the truncated generator is not completely positive.
    pub fn min_symbol(&self) -> f64 {
        let dim = self.offsets.first().map_or(0, |o| o.len());
        let m = (4 * self.radius + 2) as usize;
        let lattice = PeriodicBox { dim, side: m };
        (0..lattice.sites())
            .map(|s| {
                let k: Vec<f64> =
                    lattice.coords(s).iter().map(|&c| 2.0 * std::f64::consts::PI * c as f64 / m as f64).collect();
                self.offsets
                    .iter()
                    .zip(&self.values)
                    .map(|(o, v)| {
                        let phase: f64 = o.iter().zip(&k).map(|(a, b)| *a as f64 * b).sum();
                        (v * Complex64::from_polar(1.0, -phase)).re
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn origin(&self) -> f64 {
        let mid = self.offsets.len() / 2;
        debug_assert!(self.offsets[mid].iter().all(|&c| c == 0));
        self.values[mid].re
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }
}

/// One jump channel `(i, ω)`.
#[derive(Debug, Clone, Serialize)]
pub struct Channel {
    pub bath: usize,
    pub omega: f64,
    /// `W_{i,ω}` in the standard basis.
    #[serde(skip)]
    pub jump: CMatrix,
    pub kernel: KernelTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationWarning {
    pub bath: usize,
    pub omega: f64,
    /// `Σ |c(δ,ω)|` over `R < |δ|∞ ≤ 2R`.
    pub annulus_mass: f64,
    pub origin: f64,
}

/// Weight applied to the kernel inside the truncation stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum KernelWindow {
    /// Plain cut-off. The truncated kernel is in general not of positive type.
    Sharp,
    /// Product of triangles `Π (1 - |δ_i|/(R+1))`, which keeps positive type.
    #[default]
    Fejer,
}

impl KernelWindow {
    pub fn weight(self, offset: &[i64], radius: i64) -> f64 {
        match self {
            Self::Sharp => 1.0,
            Self::Fejer => offset.iter().map(|&c| 1.0 - c.abs() as f64 / (radius + 1) as f64).product(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AssembleOptions {
    pub window: KernelWindow,
    /// Cross-check every kernel entry against the time-domain route.
    pub verify_routes: bool,
    /// Compute the annulus tail diagnostic.
    pub tail_diagnostic: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self { window: KernelWindow::default(), verify_routes: false, tail_diagnostic: true }
    }
}

/// Tail threshold relative to `c(0,ω)`.
const TAIL_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub(crate) system: InternalSystem,
    pub(crate) baths: Vec<Arc<dyn RateSource>>,
    pub(crate) alpha: Alpha,
    /// Spectrally averaged hopping, present iff α = 2.
    pub(crate) hopping: Option<HoppingSpec>,
    pub(crate) lattice_dim: usize,
    pub(crate) lamb: CMatrix,
    pub(crate) channels: Vec<Channel>,
    pub(crate) r_trunc: i64,
    pub(crate) window: KernelWindow,
    pub(crate) warnings: Vec<TruncationWarning>,
}

pub fn embed(offset: &[i64], dim: usize) -> Vec<i64> {
    let mut out = offset.to_vec();
    out.resize(dim, 0);
    out
}

pub fn assemble(
    baths: Vec<Arc<dyn RateSource>>,
    system: &InternalSystem,
    hopping: &HoppingSpec,
    alpha: Alpha,
    r_trunc: i64,
) -> Result<LindbladGenerator, LindbladError> {
    assemble_with(baths, system, hopping, alpha, r_trunc, AssembleOptions::default())
}

pub fn assemble_with(
    baths: Vec<Arc<dyn RateSource>>,
    system: &InternalSystem,
    hopping: &HoppingSpec,
    alpha: Alpha,
    r_trunc: i64,
    opts: AssembleOptions,
) -> Result<LindbladGenerator, LindbladError> {
    if r_trunc < 1 {
        return Err(LindbladError::Invalid("truncation radius must be at least 1".into()));
    }
    if baths.len() != system.couplings().len() {
        return Err(LindbladError::Invalid(format!(
            "{} baths but {} coupling matrices",
            baths.len(),
            system.couplings().len()
        )));
    }
    if hopping.internal_dim() != system.dim() {
        return Err(LindbladError::Invalid("hopping and S act on different internal spaces".into()));
    }
    let lattice_dim = hopping.dim();
    for b in &baths {
        if b.dimension() < lattice_dim {
            return Err(LindbladError::Invalid(format!(
                "bath `{}` has dimension {} below the lattice dimension {lattice_dim}",
                b.label(),
                b.dimension()
            )));
        }
    }
    let averaged = match alpha {
        Alpha::Two => Some(spectral_average_hopping(hopping, system)?),
        Alpha::AboveTwo => None,
    };
    let n = system.dim();
    let stencil = PeriodicBox::stencil(lattice_dim, r_trunc);
    let mut lamb = CMatrix::zeros(n, n);
    let mut channels = Vec::new();
    let mut warnings = Vec::new();
    for (i, bath) in baths.iter().enumerate() {
        let scale = spectral_norm(system.coupling(i)).max(1.0);
        for (omega, jump) in jump_components(system, i) {
            if max_abs(&jump) <= 1e-14 * scale {
                continue;
            }
            let weight = bath.lamb_shift(omega)?;
            lamb += jump.adjoint() * &jump * Complex64::new(weight, 0.0);
            if omega == 0.0 {
                continue;
            }
            let embedded: Vec<Vec<i64>> = stencil.iter().map(|o| embed(o, bath.dimension())).collect();
            let raw = bath.rates(&embedded, omega)?;
            let values = raw
                .iter()
                .zip(&stencil)
                .map(|(v, o)| v * opts.window.weight(o, r_trunc))
                .collect();
            if opts.verify_routes {
                verify_routes(bath.as_ref(), &embedded, omega)?;
            }
            let kernel = KernelTable { radius: r_trunc, offsets: stencil.clone(), values };
            if opts.tail_diagnostic && !kernel.is_zero() {
                let annulus: Vec<Vec<i64>> = PeriodicBox::stencil(lattice_dim, 2 * r_trunc)
                    .into_iter()
                    .filter(|o| o.iter().any(|c| c.abs() > r_trunc))
                    .map(|o| embed(&o, bath.dimension()))
                    .collect();
                let mass: f64 = bath.rates(&annulus, omega)?.iter().map(|c| c.norm()).sum();
                if mass > TAIL_FRACTION * kernel.origin() {
                    warnings.push(TruncationWarning { bath: i, omega, annulus_mass: mass, origin: kernel.origin() });
                }
            }
            channels.push(Channel { bath: i, omega, jump, kernel });
        }
    }
    let lamb = (&lamb + lamb.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(LindbladGenerator {
        system: system.clone(),
        baths,
        alpha,
        hopping: averaged,
        lattice_dim,
        lamb,
        channels,
        r_trunc,
        window: opts.window,
        warnings,
    })
}

fn verify_routes(bath: &dyn RateSource, offsets: &[Vec<i64>], omega: f64) -> Result<(), BathError> {
    let Some(spec) = bath_spec(bath) else { return Ok(()) };
    for x in offsets {
        crate::bath::rate_checked(spec, x, omega)?;
    }
    Ok(())
}

fn bath_spec(bath: &dyn RateSource) -> Option<&crate::bath::BathSpec> {
    bath.as_bath_spec()
}

impl LindbladGenerator {
    pub fn system(&self) -> &InternalSystem {
        &self.system
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn hopping(&self) -> Option<&HoppingSpec> {
        self.hopping.as_ref()
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    /// Lamb-shift matrix Υ in the standard basis.
    pub fn lamb_shift(&self) -> &CMatrix {
        &self.lamb
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn baths(&self) -> &[Arc<dyn RateSource>] {
        &self.baths
    }

    pub fn truncation_radius(&self) -> i64 {
        self.r_trunc
    }

    pub fn window(&self) -> KernelWindow {
        self.window
    }

    pub fn warnings(&self) -> &[TruncationWarning] {
        &self.warnings
    }

    /// `‖Υ - Υ†‖` and `‖[Υ, S]‖` (largest entries).
    pub fn lamb_residuals(&self) -> (f64, f64) {
        (
            max_abs(&(&self.lamb - self.lamb.adjoint())),
            max_abs(&commutator(&self.lamb, self.system.hamiltonian())),
        )
    }

    /// Operator-norm estimate used for the step-size check: spectral spread of
    /// `H♮(k) + Υ` over the box momenta plus `Σ 2 c(0,ω) ‖W_ω‖²`.
    pub fn norm_estimate(&self, lattice: &PeriodicBox) -> f64 {
        let n = self.system.dim();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let side = lattice.side;
        let momenta: Vec<Vec<f64>> = (0..lattice.sites())
            .map(|s| {
                lattice
                    .coords(s)
                    .iter()
                    .map(|&c| 2.0 * std::f64::consts::PI * c as f64 / side as f64)
                    .collect()
            })
            .collect();
        for k in &momenta {
            let mut h = self.lamb.clone();
            if let Some(hop) = &self.hopping {
                h += hop.symbol(k);
            }
            let (vals, _) = hermitian_eigen(&h);
            lo = lo.min(vals[0]);
            hi = hi.max(vals[n - 1]);
        }
        let dissipative: f64 = self
            .channels
            .iter()
            .map(|c| 2.0 * c.kernel.origin().abs() * spectral_norm(&c.jump).powi(2))
            .sum();
        (hi - lo) + dissipative
    }
}
