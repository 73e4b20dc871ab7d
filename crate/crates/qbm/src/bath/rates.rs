use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::Complex64;
use serde::Serialize;

use super::correlation::torus_momenta;
use super::{BathError, BathSpec, TOL_RATE};
use crate::numerics::bessel::{radial_kernel, radial_prefactor, sphere_area};
use crate::numerics::quad::{graded_points, integrate_adaptive, normalize_breaks, AdaptiveConfig, Tolerance};
use crate::numerics::sphere::SphereRule;

/// Damping parameters used for the η → 0 extrapolations.
pub const DAMPING_LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn norm_of(x: &[i64]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// `(2π)^{1-d} w(|ω|)` with `w = |g|²(1+ζ)` for emission (ω < 0) and
/// `w = |g|²ζ` for absorption (ω > 0): the shell density per unit surface.
pub fn shell_weight(spec: &BathSpec, omega: f64) -> Result<f64, BathError> {
    if !spec.is_radial_linear() {
        return Err(BathError::UnsupportedDispersion {
            label: spec.label.clone(),
            reason: "shell rates need ν(q) = |q|".into(),
        });
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let k = omega.abs();
    if k >= spec.support_radius {
        return Err(BathError::BandEdge { omega, radius: spec.support_radius });
    }
    let w = if omega < 0.0 { spec.emission_weight(k) } else { spec.absorption_weight(k) };
    Ok((2.0 * PI).powi(1 - spec.dimension as i32) * w)
}

/// c(x,ω) as a sphere integral of radius |ω|. `c(x, 0) = 0` by convention.
pub fn rate(spec: &BathSpec, x: &[i64], omega: f64) -> Result<Complex64, BathError> {
    let w = shell_weight(spec, omega)?;
    if w == 0.0 {
        return Ok(zero());
    }
    let rule = SphereRule::for_extent(spec.dimension, omega.abs() * norm_of(x));
    Ok(rate_with_rule(spec.dimension, &rule, w, x, omega))
}

fn rate_with_rule(dim: usize, rule: &SphereRule, weight: f64, x: &[i64], omega: f64) -> Complex64 {
    debug_assert_eq!(rule.dim(), dim);
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut c = rule.phase_integral(omega.abs(), &xf) * weight;
    // Real for radial specs; drop quadrature round-off in the imaginary part.
    c.im = 0.0;
    c
}

#[derive(Debug, Clone, Serialize)]
pub struct Extrapolated {
    pub value: f64,
    /// Quadratic minus linear extrapolation.
    pub residual: f64,
    /// Damped values at [`DAMPING_LADDER`].
    pub estimates: Vec<f64>,
}

fn resonance_breaks(spec: &BathSpec, energies: &[f64], eta: f64) -> Vec<f64> {
    let r = spec.support_radius;
    let mut pts = graded_points(0.0, r, 12, 0.0, r);
    for &e in energies {
        for k0 in spec.resonances(e) {
            pts.push(k0);
            let mut h = 0.25 * eta;
            while h < r {
                pts.push(k0 - h);
                pts.push(k0 + h);
                h *= 4.0;
            }
        }
    }
    // Near-resonant region at ω = 0 sits at the origin.
    let mut h = 0.25 * eta;
    while h < r {
        pts.push(h);
        h *= 4.0;
    }
    normalize_breaks(pts, 0.0, r)
}

fn radial_config(width: f64) -> AdaptiveConfig {
    AdaptiveConfig {
        tol: Tolerance { rel: 1e-11, abs: 1e-16 },
        order: 10,
        max_panels: 50_000,
        max_width: width,
    }
}

/// `∫ dt f(x,t) e^{-itω - η|t|}`, evaluated after the time integral:
/// Lorentzians `2η/(η² + (ν ∓ ω)²)` weight the two branches of f.
pub fn damped_rate(spec: &BathSpec, x: &[i64], omega: f64, eta: f64) -> Result<f64, BathError> {
    let d = spec.dimension;
    let rho = norm_of(x);
    let r = spec.support_radius;
    let breaks = resonance_breaks(spec, &[omega, -omega], eta);
    let width = if rho > 0.0 { (PI / (2.0 * rho)).min(r / 4.0) } else { r / 4.0 };
    let est = integrate_adaptive(
        |k| {
            let nu = spec.energy(k);
            let la = 2.0 * eta / (eta * eta + (nu - omega).powi(2));
            let le = 2.0 * eta / (eta * eta + (nu + omega).powi(2));
            let w = k.powi(d as i32 - 1) * radial_kernel(d, k * rho);
            Complex64::new(w * (spec.absorption_weight(k) * la + spec.emission_weight(k) * le), 0.0)
        },
        &breaks,
        &radial_config(width),
    )?;
    Ok(est.value.re * radial_prefactor(d) / (2.0 * PI).powi(d as i32))
}

fn extrapolate(omega: f64, estimates: [f64; 3], floor: f64) -> Result<Extrapolated, BathError> {
    let e = DAMPING_LADDER;
    let quadratic: f64 = (0..3)
        .map(|i| {
            let mut w = estimates[i];
            for j in 0..3 {
                if j != i {
                    w *= e[j] / (e[j] - e[i]);
                }
            }
            w
        })
        .sum();
    let linear = (estimates[2] * e[1] - estimates[1] * e[2]) / (e[1] - e[2]);
    let step_coarse = (estimates[1] - estimates[0]).abs();
    let step_fine = (estimates[2] - estimates[1]).abs();
    if step_fine > step_coarse + floor {
        return Err(BathError::ExtrapolationUnstable { omega, estimates: estimates.to_vec() });
    }
    Ok(Extrapolated { value: quadratic, residual: (quadratic - linear).abs(), estimates: estimates.to_vec() })
}

/// Time-domain route for c(x,ω): damped transforms at [`DAMPING_LADDER`]
/// extrapolated to η = 0 with a quadratic in η.
pub fn rate_time_domain(spec: &BathSpec, x: &[i64], omega: f64) -> Result<Extrapolated, BathError> {
    let mut est = [0.0; 3];
    for (slot, &eta) in est.iter_mut().zip(&DAMPING_LADDER) {
        *slot = damped_rate(spec, x, omega, eta)?;
    }
    let floor = 1e-12 + 1e-9 * est[2].abs();
    extrapolate(omega, est, floor)
}

/// Shell route checked against the time route. The tolerance is relative to
/// `c(0,ω)`, which bounds `|c(x,ω)|`.
pub fn rate_checked(spec: &BathSpec, x: &[i64], omega: f64) -> Result<Complex64, BathError> {
    let shell = rate(spec, x, omega)?;
    if omega == 0.0 {
        return Ok(shell);
    }
    let time = rate_time_domain(spec, x, omega)?.value;
    let origin = vec![0; spec.dimension];
    let scale = rate(spec, &origin, omega)?.re.abs();
    let allowed = TOL_RATE * scale + 1e-12;
    if (shell.re - time).abs() > allowed {
        return Err(BathError::RouteDisagreement { x: x.to_vec(), omega, shell: shell.re, time, allowed });
    }
    Ok(shell)
}

/// `Im ∫_0^∞ dt f(0,t) e^{-itω - ηt}`.
pub fn damped_lamb_shift(spec: &BathSpec, omega: f64, eta: f64) -> Result<f64, BathError> {
    let d = spec.dimension;
    let r = spec.support_radius;
    let breaks = resonance_breaks(spec, &[omega, -omega], eta);
    let est = integrate_adaptive(
        |k| {
            let nu = spec.energy(k);
            let a = nu - omega;
            let e = nu + omega;
            let v = spec.absorption_weight(k) * a / (eta * eta + a * a)
                - spec.emission_weight(k) * e / (eta * eta + e * e);
            Complex64::new(k.powi(d as i32 - 1) * v, 0.0)
        },
        &breaks,
        &radial_config(r / 4.0),
    )?;
    Ok(est.value.re * sphere_area(d, 1.0) / (2.0 * PI).powi(d as i32))
}

/// Lamb-shift weight `Im ∫_0^∞ dt f(0,t) e^{-itω}` by damping and extrapolation.
pub fn lamb_shift_weight(spec: &BathSpec, omega: f64) -> Result<Extrapolated, BathError> {
    let mut est = [0.0; 3];
    for (slot, &eta) in est.iter_mut().zip(&DAMPING_LADDER) {
        *slot = damped_lamb_shift(spec, omega, eta)?;
    }
    let floor = 1e-12 + 1e-9 * est[2].abs();
    extrapolate(omega, est, floor)
}

/// Anything that supplies jump-rate kernels and Lamb-shift weights.
pub trait RateSource: Send + Sync + Debug {
    fn label(&self) -> &str;
    fn dimension(&self) -> usize;
    fn rate(&self, x: &[i64], omega: f64) -> Result<Complex64, BathError>;
    fn lamb_shift(&self, omega: f64) -> Result<f64, BathError>;

    /// Rates on many offsets at one frequency.
    fn rates(&self, offsets: &[Vec<i64>], omega: f64) -> Result<Vec<Complex64>, BathError> {
        offsets.iter().map(|x| self.rate(x, omega)).collect()
    }

    /// The underlying continuum bath, when there is one.
    fn as_bath_spec(&self) -> Option<&BathSpec> {
        None
    }
}

impl RateSource for BathSpec {
    fn label(&self) -> &str {
        &self.label
    }

    fn as_bath_spec(&self) -> Option<&BathSpec> {
        Some(self)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn rate(&self, x: &[i64], omega: f64) -> Result<Complex64, BathError> {
        rate(self, x, omega)
    }

    fn lamb_shift(&self, omega: f64) -> Result<f64, BathError> {
        Ok(lamb_shift_weight(self, omega)?.value)
    }

    fn rates(&self, offsets: &[Vec<i64>], omega: f64) -> Result<Vec<Complex64>, BathError> {
        let w = shell_weight(self, omega)?;
        if w == 0.0 {
            return Ok(vec![zero(); offsets.len()]);
        }
        let extent = offsets.iter().map(|x| norm_of(x)).fold(0.0, f64::max) * omega.abs();
        let rule = SphereRule::for_extent(self.dimension, extent);
        Ok(offsets.iter().map(|x| rate_with_rule(self.dimension, &rule, w, x, omega)).collect())
    }
}

/// A bath confined to a torus of the given side: its correlation is a finite
/// sum of modes, so the η → 0 rates vanish unless a mode is exactly resonant.
#[derive(Debug, Clone)]
pub struct FiniteVolumeBath {
    pub spec: BathSpec,
    pub side: usize,
}

/// Relative distance to a mode below which a finite-volume rate is singular.
const RESONANCE_GAP: f64 = 1e-9;

impl FiniteVolumeBath {
    pub fn new(spec: BathSpec, side: usize) -> Self {
        Self { spec, side }
    }

    /// Modes `(q, ν(q), ψ_a, ψ_e)` with nonzero weight.
    pub fn modes(&self) -> Vec<(Vec<f64>, f64, f64, f64)> {
        torus_momenta(self.spec.dimension, self.side)
            .into_iter()
            .filter_map(|q| {
                let k = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                let (wa, we) = (self.spec.absorption_weight(k), self.spec.emission_weight(k));
                (wa != 0.0 || we != 0.0).then(|| (q, self.spec.energy(k), wa, we))
            })
            .collect()
    }

    fn volume(&self) -> f64 {
        (self.side as f64).powi(self.spec.dimension as i32)
    }
}

impl RateSource for FiniteVolumeBath {
    fn label(&self) -> &str {
        &self.spec.label
    }

    fn dimension(&self) -> usize {
        self.spec.dimension
    }

    fn rate(&self, _x: &[i64], omega: f64) -> Result<Complex64, BathError> {
        if omega == 0.0 {
            return Ok(zero());
        }
        for (_, nu, _, _) in self.modes() {
            if (nu - omega.abs()).abs() <= RESONANCE_GAP * nu.max(1.0) {
                return Err(BathError::InvalidSpec {
                    label: self.spec.label.clone(),
                    reason: format!("Bohr frequency {omega} is resonant with a finite-volume mode"),
                });
            }
        }
        Ok(zero())
    }

    fn lamb_shift(&self, omega: f64) -> Result<f64, BathError> {
        let mut acc = 0.0;
        for (_, nu, wa, we) in self.modes() {
            let (a, e) = (nu - omega, nu + omega);
            if (wa != 0.0 && a.abs() <= RESONANCE_GAP) || (we != 0.0 && e.abs() <= RESONANCE_GAP) {
                return Err(BathError::InvalidSpec {
                    label: self.spec.label.clone(),
                    reason: format!("Lamb shift at omega={omega} hits a finite-volume mode"),
                });
            }
            if wa != 0.0 {
                acc += wa / a;
            }
            if we != 0.0 {
                acc -= we / e;
            }
        }
        Ok(acc / self.volume())
    }
}

/// Explicit kernel table, identical for every frequency; offsets outside the
/// table carry rate zero.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    label: String,
    dim: usize,
    table: HashMap<Vec<i64>, Complex64>,
    lamb: f64,
}

impl TabulatedKernel {
    pub fn new(label: impl Into<String>, dim: usize, entries: Vec<(Vec<i64>, Complex64)>, lamb: f64) -> Self {
        Self { label: label.into(), dim, table: entries.into_iter().collect(), lamb }
    }
}

impl RateSource for TabulatedKernel {
    fn label(&self) -> &str {
        &self.label
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn rate(&self, x: &[i64], omega: f64) -> Result<Complex64, BathError> {
        if omega == 0.0 {
            return Ok(zero());
        }
        Ok(self.table.get(x).copied().unwrap_or_else(zero))
    }

    fn lamb_shift(&self, _omega: f64) -> Result<f64, BathError> {
        Ok(self.lamb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{Dispersion, FormFactor, Occupation};

    fn flat(dim: usize, amplitude: f64, occupation: Occupation) -> BathSpec {
        BathSpec::new("flat", dim, Dispersion::Linear, FormFactor::Constant { amplitude }, occupation, 3.0).unwrap()
    }

    #[test]
    fn zero_temperature_has_no_absorption() {
        let s = flat(2, 1.0, Occupation::Zero);
        for x in [[0, 0], [2, -3]] {
            assert_eq!(rate(&s, &x, 0.8).unwrap(), zero());
        }
    }

    #[test]
    fn emission_at_origin_in_two_dimensions() {
        // (2π)^{-1} · 2πε · |g|²
        let (eps, g) = (1.2, 0.7);
        let s = flat(2, g, Occupation::Zero);
        let c = rate(&s, &[0, 0], -eps).unwrap();
        assert!((c.re - eps * g * g).abs() < 1e-13);
    }

    #[test]
    fn band_edge_and_zero_frequency() {
        let s = flat(2, 1.0, Occupation::Zero);
        assert!(matches!(rate(&s, &[0, 0], -3.0), Err(BathError::BandEdge { .. })));
        assert_eq!(rate(&s, &[1, 0], 0.0).unwrap(), zero());
    }

    #[test]
    fn time_route_matches_shell() {
        let s = BathSpec::smooth_bump(2, 2.5, 1.0, Some(1.0)).unwrap();
        for x in [[0, 0], [1, 2], [-4, 3]] {
            for omega in [-1.0, 0.7] {
                rate_checked(&s, &x, omega).unwrap();
            }
        }
    }

    #[test]
    fn lamb_shift_closed_form_flat_zero_temperature() {
        // -(1/2π)[r - ω ln((r+ω)/ω)] for ζ = 0, g = 1 on |q| < r, d = 2, ω > 0
        let s = flat(2, 1.0, Occupation::Zero);
        let (r, w) = (3.0f64, 0.9f64);
        let exact = -(r - w * ((r + w) / w).ln()) / (2.0 * PI);
        let got = lamb_shift_weight(&s, w).unwrap();
        assert!((got.value - exact).abs() < 1e-7 * exact.abs(), "{got:?} vs {exact}");
    }

    #[test]
    fn finite_volume_lamb_shift_is_a_mode_sum() {
        let spec = flat(1, 1.0, Occupation::Zero);
        let fv = FiniteVolumeBath::new(spec, 5);
        let q1 = 2.0 * PI / 5.0;
        let q2 = 4.0 * PI / 5.0;
        let omega = 0.8;
        let expect = -(2.0 / (q1 + omega) + 2.0 / (q2 + omega)) / 5.0;
        assert!((fv.lamb_shift(omega).unwrap() - expect).abs() < 1e-14);
        assert_eq!(fv.rate(&[2], -omega).unwrap(), zero());
        assert!(fv.rate(&[0], -q1).is_err());
    }
}
