//! Bosonic bath correlation functions and the quantities derived from them.
//!
//! Every bath is described by a [`BathSpec`] whose dispersion, form factor and
//! occupation depend on `|q|` only. The correlation function
//! `f(x,t) = ∫ dq/(2π)^d |g(q)|² (ζ e^{iq·x + itν} + (1+ζ) e^{-iq·x - itν})`
//! is available by direct d-dimensional quadrature ([`correlation`]), by a
//! radial Bessel reduction ([`bessel_correlation`]) and on a finite torus
//! ([`torus_correlation`]). Jump rates come from [`rate`] (sphere integrals)
//! with an independent damped time-domain route in [`rate_time_domain`].

mod correlation;
mod decay;
mod rates;
mod spec;

pub use correlation::{
    bessel_correlation, correlation, correlation_finite_volume, correlation_table,
    torus_correlation, torus_momenta, CorrelationTable,
};
pub use decay::{decay_profile, fit_decay, sup_profile, DecayExponents, DecayRow};
pub use rates::{
    damped_lamb_shift, damped_rate, lamb_shift_weight, rate, rate_checked, rate_time_domain,
    shell_weight, Extrapolated, FiniteVolumeBath, RateSource, TabulatedKernel, DAMPING_LADDER,
};
pub use spec::{BathSpec, Dispersion, FormFactor, Occupation, RadialTable};

use thiserror::Error;

use crate::numerics::quad::QuadError;

/// Relative accuracy of correlation quadratures.
pub const TOL_QUAD: f64 = 1e-6;
/// Absolute floor used together with [`TOL_QUAD`].
pub const TOL_QUAD_ABS: f64 = 1e-12;
/// Relative agreement required between the two rate routes.
pub const TOL_RATE: f64 = 1e-4;
/// Smallest admissible eigenvalue of a rate Gram matrix.
pub const TOL_PSD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid bath spec `{label}`: {reason}")]
    InvalidSpec { label: String, reason: String },
    #[error(transparent)]
    QuadratureNonConvergence(#[from] QuadError),
    #[error(
        "rate routes disagree at x={x:?}, omega={omega}: shell {shell:.9e}, time {time:.9e}, allowed {allowed:.3e}"
    )]
    RouteDisagreement { x: Vec<i64>, omega: f64, shell: f64, time: f64, allowed: f64 },
    #[error("bath `{label}`: {reason}")]
    UnsupportedDispersion { label: String, reason: String },
    #[error("damping extrapolation unstable at omega={omega}: estimates {estimates:?}")]
    ExtrapolationUnstable { omega: f64, estimates: Vec<f64> },
    #[error("|omega|={omega} is at or beyond the form-factor support radius {radius}")]
    BandEdge { omega: f64, radius: f64 },
}
