//! Generator assembly, lattice density-matrix evolution and the Kraus-form
//! certificate.
//!
//! States are stored in the eigenbasis of S, one `|Λ|×|Λ|` array per internal
//! matrix entry. The generator commutes with `i[S,·]`, so only the Bohr
//! sectors present in the initial state are ever populated and the others are
//! not stored.

mod apply;
mod certificate;
mod dense;
mod evolve;
mod generator;
mod state;

pub use apply::ApplyPlan;
pub use certificate::{kraus_certificate, kraus_certificate_with_radius, stencil_min_eigenvalue, ChannelCertificate, KrausReport};
pub use dense::{dense_generator, unvec, vec_of};
pub use evolve::{evolve, evolve_with, msd, EvolveOptions, MsdTable, Observation, Trajectory};
pub use generator::{assemble, assemble_with, Alpha, AssembleOptions, Channel, KernelTable, KernelWindow, LindbladGenerator, TruncationWarning};
pub use state::LatticeDensityMatrix;

use thiserror::Error;

use crate::bath::BathError;
use crate::particle::ParticleError;

/// Trace drift allowed per unit τ.
pub const TRACE_DRIFT_PER_TAU: f64 = 1e-8;
/// Largest admissible `dτ·‖L‖`.
pub const MAX_STEP_NORM: f64 = 0.1;
/// Spot-check threshold for negative eigenvalues.
pub const POSITIVITY_FLOOR: f64 = -1e-6;
/// Largest admissible anti-Hermitian part produced by one step.
pub const MAX_ASYMMETRY: f64 = 1e-10;
/// Boundary population allowed at the end of a run.
pub const BOUNDARY_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error("box too small: {0}")]
    BoxTooSmall(String),
    #[error("step too large: dτ·‖L‖ = {product:.3e} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },
    #[error("positivity lost at τ={tau}: smallest eigenvalue {min_eigenvalue:.3e}")]
    PositivityLoss { tau: f64, min_eigenvalue: f64 },
    #[error("step produced an anti-Hermitian part of size {asymmetry:.3e} at τ={tau}")]
    HermiticityLoss { tau: f64, asymmetry: f64 },
    #[error("generator and state use different internal bases or boxes")]
    Incompatible,
    #[error("invalid input: {0}")]
    Invalid(String),
}
