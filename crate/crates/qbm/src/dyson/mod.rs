//! Finite-volume Dyson series for the reduced particle dynamics.
//!
//! The box correlation is a finite sum of plane waves, so every pair
//! contraction factorises into one phase at its opening vertex and one at its
//! closing vertex. Time-ordered integrals are then evaluated level by level
//! with a shared composite Gauss–Legendre grid, carrying the labels of the
//! pairs still open.

mod model;
mod pairing;
mod scaling;
mod series;
mod spectral;
mod term;

pub use model::{BathMode, DysonBox, Side};
pub use pairing::{Pairing, VertexRole, enumerate_pairings, pair_reordering_sides, pairing_count};
pub use scaling::{
    CrossingRow, CrossingScan, ScalingComparison, ScalingRow, crossing_majorant, crossing_suppression_scan,
    scaling_limit_compare, superoperator_norm,
};
pub use series::{
    DysonOutput, DysonPropagator, QuadratureGrid, SeriesEvaluator, dyson_apply, dyson_propagator, majorant_ratio,
    majorant_tail,
};
pub use spectral::{SpectralAverageRow, SpectralAverageTable, sector_average, spectral_average_check, time_average};
pub use term::{DysonTerm, TermValue};

use thiserror::Error;

use crate::bath::BathError;
use crate::lindblad::LindbladError;
use crate::particle::ParticleError;

/// Largest order accepted by the pairing enumerator.
pub const MAX_PAIRING_ORDER: usize = 4;
/// Largest order of a series partial sum.
pub const MAX_SERIES_ORDER: usize = 3;
/// Largest `|Λ|N` for which superoperators are materialised.
pub const MAX_DENSE_DIM: usize = 32;
/// Largest admissible majorant tail.
pub const TAIL_LIMIT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DysonError {
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("order {n} exceeds the supported maximum {max}")]
    OrderTooLarge { n: usize, max: usize },
    #[error("majorant tail {tail:.3e} exceeds {limit:.1e}")]
    TailTooLarge { tail: f64, limit: f64 },
    #[error("term norm {norm:.6e} exceeds its bound {bound:.6e}")]
    BoundViolated { norm: f64, bound: f64 },
    #[error("|Λ|N = {dim} is above {max}; superoperators are not materialised")]
    BoxTooLarge { dim: usize, max: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}
