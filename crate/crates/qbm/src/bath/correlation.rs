use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{BathError, BathSpec, TOL_QUAD, TOL_QUAD_ABS};
use crate::numerics::bessel::{radial_kernel, radial_prefactor};
use crate::numerics::quad::{graded_points, integrate_adaptive, normalize_breaks, AdaptiveConfig, Tolerance};

const GRADING_LEVELS: u32 = 12;

fn oscillation_width(x: &[i64], t: f64, radius: f64) -> f64 {
    let xmax = x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64;
    let scale = xmax.max(t.abs());
    if scale > 0.0 { (PI / (4.0 * scale)).min(radius / 2.0) } else { radius / 2.0 }
}

/// f(x,t) by iterated adaptive Gauss–Legendre quadrature over the ball
/// `|q| < r` in Cartesian coordinates.
pub fn correlation(spec: &BathSpec, x: &[i64], t: f64) -> Result<Complex64, BathError> {
    spec.validate()?;
    check_point(spec, x)?;
    let d = spec.dimension;
    let r = spec.support_radius;
    let width = oscillation_width(x, t, r);
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let failure = RefCell::new(None);
    let mut q = vec![0.0; d];
    let value = integrate_level(spec, &xf, t, 0, &mut q, width, &failure)?;
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(value / (2.0 * PI).powi(d as i32))
}

fn integrand(spec: &BathSpec, q: &[f64], x: &[f64], t: f64) -> Complex64 {
    let k = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let wa = spec.absorption_weight(k);
    let we = spec.emission_weight(k);
    if wa == 0.0 && we == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let phase = q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + t * spec.energy(k);
    Complex64::from_polar(wa, phase) + Complex64::from_polar(we, -phase)
}

fn integrate_level(
    spec: &BathSpec,
    x: &[f64],
    t: f64,
    level: usize,
    q: &mut [f64],
    width: f64,
    failure: &RefCell<Option<BathError>>,
) -> Result<Complex64, BathError> {
    let d = spec.dimension;
    let r = spec.support_radius;
    let used: f64 = q[..level].iter().map(|v| v * v).sum();
    let h = (r * r - used).max(0.0).sqrt();
    if h == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let breaks = normalize_breaks(graded_points(0.0, h, GRADING_LEVELS, -h, h), -h, h);
    let last = level + 1 == d;
    let cfg = AdaptiveConfig {
        tol: if level == 0 {
            Tolerance { rel: 0.1 * TOL_QUAD, abs: 0.1 * TOL_QUAD_ABS }
        } else {
            Tolerance { rel: 1e-3 * TOL_QUAD, abs: 1e-3 * TOL_QUAD_ABS }
        },
        order: 10,
        max_panels: 4000,
        max_width: width,
    };
    let mut buf = q.to_vec();
    let est = integrate_adaptive(
        |v| {
            buf[level] = v;
            if last {
                integrand(spec, &buf, x, t)
            } else {
                match integrate_level(spec, x, t, level + 1, &mut buf, width, failure) {
                    Ok(z) => z,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            }
        },
        &breaks,
        &cfg,
    )?;
    q.copy_from_slice(&buf);
    Ok(est.value)
}

fn check_point(spec: &BathSpec, x: &[i64]) -> Result<(), BathError> {
    if x.len() != spec.dimension {
        return Err(BathError::InvalidSpec {
            label: spec.label.clone(),
            reason: format!("point {x:?} has dimension {} but the bath has {}", x.len(), spec.dimension),
        });
    }
    Ok(())
}

fn euclidean(x: &[i64]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// f(x,t) through the radial reduction
/// `(2π)^{-d/2} ∫_0^r dk k^{d-1} K_d(k|x|) (ψ_a e^{itν} + ψ_e e^{-itν})`.
pub fn bessel_correlation(spec: &BathSpec, x: &[i64], t: f64) -> Result<Complex64, BathError> {
    check_point(spec, x)?;
    bessel_correlation_radius(spec, euclidean(x), t)
}

pub(crate) fn bessel_correlation_radius(spec: &BathSpec, rho: f64, t: f64) -> Result<Complex64, BathError> {
    if !spec.is_radial_linear() {
        return Err(BathError::UnsupportedDispersion {
            label: spec.label.clone(),
            reason: "the Bessel reduction needs ν(q) = |q|".into(),
        });
    }
    let d = spec.dimension;
    let r = spec.support_radius;
    let scale = rho.max(t.abs());
    let cfg = AdaptiveConfig {
        tol: Tolerance { rel: 1e-10, abs: 1e-16 },
        order: 10,
        max_panels: 20_000,
        max_width: if scale > 0.0 { (PI / (2.0 * scale)).min(r / 4.0) } else { r / 4.0 },
    };
    let breaks = normalize_breaks(graded_points(0.0, r, GRADING_LEVELS, 0.0, r), 0.0, r);
    let est = integrate_adaptive(
        |k| {
            let w = k.powi(d as i32 - 1) * radial_kernel(d, k * rho);
            let phase = t * k;
            Complex64::from_polar(w * spec.absorption_weight(k), phase)
                + Complex64::from_polar(w * spec.emission_weight(k), -phase)
        },
        &breaks,
        &cfg,
    )?;
    Ok(est.value * radial_prefactor(d) / (2.0 * PI).powi(d as i32))
}

/// Nonzero momenta `2πm/side` of the torus with components in `(-π, π]`.
pub fn torus_momenta(dim: usize, side: usize) -> Vec<Vec<f64>> {
    assert!(side >= 1);
    let lo = -((side as i64 - 1) / 2);
    let hi = side as i64 / 2;
    let axis: Vec<f64> = (lo..=hi).map(|m| 2.0 * PI * m as f64 / side as f64).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut n = p.clone();
                    n.push(a);
                    n
                })
            })
            .collect();
    }
    out.retain(|p| p.iter().any(|&v| v != 0.0));
    out
}

/// `f^Λ(x,t) = side^{-d} Σ_{q ∈ Λ*} (ψ_a e^{iq·x + itν} + ψ_e e^{-iq·x - itν})`.
pub fn torus_correlation(spec: &BathSpec, side: usize, x: &[i64], t: f64) -> Result<Complex64, BathError> {
    check_point(spec, x)?;
    let d = spec.dimension;
    let mut acc = Complex64::new(0.0, 0.0);
    for q in torus_momenta(d, side) {
        let k = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let phase = q.iter().zip(x).map(|(a, &b)| a * b as f64).sum::<f64>() + t * spec.energy(k);
        acc += Complex64::from_polar(spec.absorption_weight(k), phase)
            + Complex64::from_polar(spec.emission_weight(k), -phase);
    }
    Ok(acc / (side as f64).powi(d as i32))
}

/// Finite-volume correlation on the box of half-width `half_width`
/// (torus side `2·half_width`).
pub fn correlation_finite_volume(
    spec: &BathSpec,
    half_width: usize,
    x: &[i64],
    t: f64,
) -> Result<Complex64, BathError> {
    if half_width < 1 {
        return Err(BathError::InvalidSpec {
            label: spec.label.clone(),
            reason: "box half-width must be at least 1".into(),
        });
    }
    torus_correlation(spec, 2 * half_width, x, t)
}

/// f(x,t) sampled on a set of lattice points and a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationTable {
    pub label: String,
    pub points: Vec<Vec<i64>>,
    pub times: Vec<f64>,
    /// Point-major: `values[p * times.len() + j]`.
    pub values: Vec<Complex64>,
}

impl CorrelationTable {
    pub fn get(&self, point: usize, time: usize) -> Complex64 {
        self.values[point * self.times.len() + time]
    }

    /// Largest excess of `|f(x,t)|` over `f(0,0)`, or `None` without the origin at t = 0.
    pub fn bound_excess(&self) -> Option<f64> {
        let p0 = self.points.iter().position(|p| p.iter().all(|&v| v == 0))?;
        let t0 = self.times.iter().position(|&t| t == 0.0)?;
        let f00 = self.get(p0, t0).re;
        Some(self.values.iter().map(|z| z.norm() - f00).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Tabulates f on `points × times`, using the radial reduction when available.
pub fn correlation_table(
    spec: &BathSpec,
    points: &[Vec<i64>],
    times: &[f64],
) -> Result<CorrelationTable, BathError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|p| (0..times.len()).map(move |j| (p, j))).collect();
    let values = jobs
        .par_iter()
        .map(|&(p, j)| {
            if spec.is_radial_linear() {
                bessel_correlation(spec, &points[p], times[j])
            } else {
                correlation(spec, &points[p], times[j])
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorrelationTable {
        label: spec.label.clone(),
        points: points.to_vec(),
        times: times.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{Dispersion, FormFactor, Occupation};

    fn flat(dim: usize, r: f64) -> BathSpec {
        BathSpec::new("flat", dim, Dispersion::Linear, FormFactor::Constant { amplitude: 1.0 }, Occupation::Zero, r)
            .unwrap()
    }

    #[test]
    fn zero_form_factor_gives_zero() {
        let s = BathSpec::new(
            "z",
            2,
            Dispersion::Linear,
            FormFactor::Constant { amplitude: 0.0 },
            Occupation::BoseEinstein { beta: 1.0 },
            2.0,
        )
        .unwrap();
        assert_eq!(correlation(&s, &[3, -1], 2.5).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn flat_disc_at_origin() {
        // ∫_{|q|<r} dq/(2π)² = r²/(4π)
        let r = 2.0;
        let s = flat(2, r);
        let exact = r * r / (4.0 * PI);
        let cart = correlation(&s, &[0, 0], 0.0).unwrap();
        let radial = bessel_correlation(&s, &[0, 0], 0.0).unwrap();
        assert!((cart.re - exact).abs() < 1e-6 * exact, "{cart}");
        assert!((radial.re - exact).abs() < 1e-9 * exact);
        assert!(cart.im.abs() < 1e-12);
    }

    #[test]
    fn torus_momenta_counts() {
        assert_eq!(torus_momenta(1, 2), vec![vec![PI]]);
        assert_eq!(torus_momenta(1, 5).len(), 4);
        assert_eq!(torus_momenta(2, 4).len(), 15);
    }

    #[test]
    fn finite_volume_half_width_two_by_hand() {
        // Λ* = {-π/2, π/2, π}; g vanishes at |q| = π = r.
        let s = BathSpec::new(
            "h",
            1,
            Dispersion::Linear,
            FormFactor::Constant { amplitude: 1.0 },
            Occupation::Zero,
            PI,
        )
        .unwrap();
        let (x, t) = (3i64, 0.7);
        let q: f64 = PI / 2.0;
        let by_hand = 0.25
            * (Complex64::from_polar(1.0, -(q * x as f64) - t * q)
                + Complex64::from_polar(1.0, q * x as f64 - t * q));
        let v = correlation_finite_volume(&s, 2, &[x], t).unwrap();
        assert!((v - by_hand).norm() < 1e-14);
        assert_eq!(correlation_finite_volume(&s, 1, &[x], t).unwrap(), Complex64::new(0.0, 0.0));
    }
}
