//! Node sets for integrals over spheres S^{d-1}, d ≤ 3.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::quad::GaussRule;

/// Unit-sphere nodes with weights summing to the sphere area.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    /// Unit vectors, `dim` coordinates each.
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Minimum number of circle nodes in d = 2.
pub const MIN_CIRCLE_NODES: usize = 512;

impl SphereRule {
    /// Rule resolving `e^{-iq·x}` for `|q|·|x| ≤ extent`.
    pub fn for_extent(dim: usize, extent: f64) -> Self {
        match dim {
            1 => Self { dim, points: vec![1.0, -1.0], weights: vec![1.0, 1.0] },
            2 => {
                let n = MIN_CIRCLE_NODES.max(8 * ((extent + 64.0) / 8.0).ceil() as usize);
                let mut points = Vec::with_capacity(2 * n);
                for j in 0..n {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / n as f64;
                    points.extend([phi.cos(), phi.sin()]);
                }
                Self { dim, points, weights: vec![2.0 * PI / n as f64; n] }
            }
            3 => {
                let n_theta = 24usize.max((extent / 2.0).ceil() as usize + 20).min(64);
                let n_phi = 48usize.max(extent.ceil() as usize + 40);
                let gl = GaussRule::new(n_theta);
                let mut points = Vec::with_capacity(3 * n_theta * n_phi);
                let mut weights = Vec::with_capacity(n_theta * n_phi);
                for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..n_phi {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                        points.extend([s * phi.cos(), s * phi.sin(), c]);
                        weights.push(w * 2.0 * PI / n_phi as f64);
                    }
                }
                Self { dim, points, weights }
            }
            _ => panic!("sphere rules are provided for d <= 3"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks(self.dim).zip(self.weights.iter().copied())
    }

    /// `∫_{S^{d-1}(radius)} dσ(q) e^{-iq·x}`.
    pub fn phase_integral(&self, radius: f64, x: &[f64]) -> Complex64 {
        let scale = radius.powi(self.dim as i32 - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, w) in self.nodes() {
            let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += Complex64::from_polar(w, -radius * dot);
        }
        acc * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bessel::{sphere_area, sphere_phase_integral};

    #[test]
    fn weights_sum_to_area() {
        for d in 1..=3 {
            let rule = SphereRule::for_extent(d, 10.0);
            let total: f64 = rule.nodes().map(|(_, w)| w).sum();
            assert!((total - sphere_area(d, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_bessel_closed_form() {
        let x2 = [3.0, -7.0];
        let x3 = [3.0, -7.0, 5.0];
        for &r in &[0.4, 1.0, 2.9] {
            let e2 = SphereRule::for_extent(2, 30.0).phase_integral(r, &x2);
            let d2: f64 = x2.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((e2.re - sphere_phase_integral(2, r, d2)).abs() < 1e-12);
            assert!(e2.im.abs() < 1e-12);
            let d3: f64 = x3.iter().map(|v| v * v).sum::<f64>().sqrt();
            let e3 = SphereRule::for_extent(3, r * d3).phase_integral(r, &x3);
            assert!((e3.re - sphere_phase_integral(3, r, d3)).abs() < 1e-10, "{e3} r={r}");
        }
    }
}
