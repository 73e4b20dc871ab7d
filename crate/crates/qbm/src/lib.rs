//! Translation-invariant Lindblad dynamics for a lattice particle with internal
//! levels, weakly coupled to free bosonic baths.
//!
//! The crate is organised bottom-up:
//!
//! - [`bath`]: correlation functions, jump-rate kernels, Lamb-shift weights and
//!   decay diagnostics computed from a declarative [`bath::BathSpec`].
//! - [`particle`]: internal Hamiltonians, Bohr-frequency decompositions, hopping
//!   kernels and spectral averaging.
//! - [`lindblad`]: generator assembly, lattice density-matrix evolution and the
//!   Kraus-form certificate.
//! - [`kinetic`]: the momentum-space jump process (master equation and
//!   Gillespie sampling) and the ratchet current.
//! - [`dyson`]: finite-volume Dyson series, pairing combinatorics and the
//!   weak-coupling comparison.
//! - [`config`] and [`runner`]: TOML experiments and the artifact writer behind
//!   the `qbm` binary.
//!
//! Energies are dimensionless with ħ = 1 and unit lattice spacing.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod config;
pub mod dyson;
pub mod kinetic;
pub mod lindblad;
pub mod numerics;
pub mod particle;
pub mod runner;

pub use num_complex::Complex64;

/// Dense complex matrix used for internal-space and small-box operators.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
