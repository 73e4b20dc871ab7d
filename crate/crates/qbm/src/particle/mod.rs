//! Internal levels, couplings, hopping kernels and spectral averaging.

mod hopping;
mod internal;
mod lattice;
mod propagation;

pub use hopping::{build_laplacian, build_ratchet, spectral_average_hopping, HoppingSpec};
pub use internal::{
    jump_components, ratchet_bath_1, ratchet_bath_2, sigma_x, spectral_projector, InternalSystem, Level,
    RATCHET_DOWN, RATCHET_LEFT, RATCHET_RIGHT, RATCHET_UP,
};
pub use lattice::PeriodicBox;
pub use propagation::{propagation_bound_scan, PropagationScan};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParticleError {
    #[error("{what} is not Hermitian (largest asymmetry {asymmetry:.3e})")]
    NotHermitian { what: String, asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frequencies {a} and {b} are closer than the degeneracy tolerance {tol:.3e} but not equal")]
    DegeneracyAmbiguity { a: f64, b: f64, tol: f64 },
    #[error("{omega} is not a Bohr frequency of S")]
    UnknownBohrFrequency { omega: f64 },
    #[error("wavefront reached the box boundary at t={t} (boundary weight {mass:.3e})")]
    WrapAround { t: f64, mass: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
}
