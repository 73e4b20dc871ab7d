//! Momentum-space jump process for a nondegenerate internal Hamiltonian:
//! master-equation integration on a grid, exact stochastic simulation with
//! continuous momenta, and the ratchet current computed on the lattice.

mod density;
mod gillespie;
mod master;
mod ratchet;
mod rates;

pub use density::{MomentumDensity, MomentumGrid};
pub use gillespie::{
    ensemble, gillespie, gillespie_jumps, tv_against_master, JumpEvent, JumpTrajectory, TvReport,
};
pub use master::{evolve_master, MasterOperator, MasterRecord, MasterTrajectory};
pub use ratchet::{ratchet_current, RatchetConfig, RatchetReport, ZERO_CURRENT_FLOOR};
pub use rates::{build_rates, JumpRates, Transition};

use thiserror::Error;

use crate::bath::BathError;
use crate::lindblad::LindbladError;
use crate::particle::ParticleError;

#[derive(Debug, Error)]
pub enum KineticError {
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("S has degenerate levels {levels:?}; use the lattice Lindblad evolution instead")]
    DegenerateSpectrum { levels: Vec<f64> },
    #[error("momentum grid M={m} is too coarse; need M ≥ {required:.1} to resolve the smallest shell")]
    GridTooCoarse { m: usize, required: f64 },
    #[error("density became negative ({value:.3e}) at τ={tau}")]
    NegativeDensity { value: f64, tau: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}
