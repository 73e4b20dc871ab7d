//! Bessel-function helpers for radial Fourier transforms.
//!
//! For a radial function F on R^d,
//! `∫ dq F(|q|) e^{iq·x} = (2π)^{d/2} ∫_0^∞ dk k^{d-1} F(k) K_d(k|x|)`
//! with `K_d(z) = J_ν(z) / z^ν` and `ν = (d-2)/2`.

use std::f64::consts::PI;

/// Order ν = (d-2)/2 of the Bessel function in the radial reduction.
pub fn radial_order(dim: usize) -> f64 {
    (dim as f64 - 2.0) / 2.0
}

/// J_ν(z) for integer or half-integer ν ≥ -1/2 and z ≥ 0.
pub fn bessel_j(nu: f64, z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if nu == -0.5 {
        return if z == 0.0 { f64::INFINITY } else { (2.0 / (PI * z)).sqrt() * z.cos() };
    }
    if nu == 0.5 {
        return if z == 0.0 { 0.0 } else { (2.0 / (PI * z)).sqrt() * z.sin() };
    }
    if nu.fract() == 0.0 && nu >= 0.0 {
        return puruspe::Jn(nu as u32, z);
    }
    if z == 0.0 {
        return 0.0;
    }
    puruspe::Jnu_Ynu(nu, z).0
}

/// `K_d(z) = J_ν(z)/z^ν`, continuous at z = 0.
pub fn radial_kernel(dim: usize, z: f64) -> f64 {
    let z = z.abs();
    match dim {
        1 => (2.0 / PI).sqrt() * z.cos(),
        2 => puruspe::Jn(0, z),
        3 => {
            let s = if z < 1e-4 { 1.0 - z * z / 6.0 } else { z.sin() / z };
            (2.0 / PI).sqrt() * s
        }
        _ => {
            let nu = radial_order(dim);
            if z < 1e-4 {
                let lead = 1.0 / (2f64.powf(nu) * puruspe::gamma(nu + 1.0));
                lead * (1.0 - z * z / (4.0 * (nu + 1.0)))
            } else {
                bessel_j(nu, z) / z.powf(nu)
            }
        }
    }
}

/// `(2π)^{d/2}`, the prefactor of the radial reduction.
pub fn radial_prefactor(dim: usize) -> f64 {
    (2.0 * PI).powf(dim as f64 / 2.0)
}

/// Surface measure of the sphere of radius `radius` in R^d (2 points for d = 1).
pub fn sphere_area(dim: usize, radius: f64) -> f64 {
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / puruspe::gamma(d / 2.0) * radius.powi(dim as i32 - 1)
}

/// Exact `∫_{S^{d-1}(ρ)} dσ(q) e^{-iq·x}`, real by symmetry.
pub fn sphere_phase_integral(dim: usize, radius: f64, dist: f64) -> f64 {
    radial_prefactor(dim) * radius.powi(dim as i32 - 1) * radial_kernel(dim, radius * dist)
}
