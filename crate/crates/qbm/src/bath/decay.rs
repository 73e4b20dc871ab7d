use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{BathError, BathSpec};
use crate::numerics::bessel::{radial_kernel, radial_prefactor};
use crate::numerics::fit::{fit_power_law, LineFit};
use crate::numerics::quad::gauss_legendre;

/// Envelopes of |f(x,t)| inside and outside the ball |x| < t/2.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub t: f64,
    pub outer_sup: f64,
    pub outer_argmax: f64,
    pub inner_max: f64,
    pub inner_argmax: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayExponents {
    pub outer: LineFit,
    pub inner: LineFit,
}

/// Distinct Euclidean lengths of lattice vectors with |x|∞ ≤ radius.
fn lattice_radii(dim: usize, radius: i64) -> Vec<f64> {
    let mut sq = BTreeSet::new();
    let side = 2 * radius + 1;
    let total = (side as u64).pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut s: i64 = 0;
        for _ in 0..dim {
            let c = (rem % side as u64) as i64 - radius;
            rem /= side as u64;
            s += c * c;
        }
        sq.insert(s);
    }
    sq.into_iter().map(|s| (s as f64).sqrt()).collect()
}

/// Fixed composite Gauss–Legendre grid on [0, r] with panels of width
/// `≈ 2/(t + ρ_max + 1)`, carrying the radial weights of f.
struct RadialGrid {
    k: Vec<f64>,
    wa: Vec<f64>,
    we: Vec<f64>,
}

impl RadialGrid {
    fn new(spec: &BathSpec, t: f64, rho_max: f64) -> Self {
        let r = spec.support_radius;
        let d = spec.dimension as i32;
        let width = 2.0 / (t.abs() + rho_max + 1.0);
        let panels = (r / width).ceil().max(4.0) as usize;
        let h = r / panels as f64;
        let rule = gauss_legendre(10);
        let (mut k, mut wa, mut we) = (Vec::new(), Vec::new(), Vec::new());
        let norm = radial_prefactor(spec.dimension) / (2.0 * PI).powi(d);
        for p in 0..panels {
            for (x, w) in rule.mapped(p as f64 * h, (p + 1) as f64 * h) {
                let base = w * x.powi(d - 1) * norm;
                k.push(x);
                wa.push(base * spec.absorption_weight(x));
                we.push(base * spec.emission_weight(x));
            }
        }
        Self { k, wa, we }
    }

    fn eval(&self, dim: usize, rho: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.k.len() {
            let kern = radial_kernel(dim, self.k[j] * rho);
            let ph = Complex64::from_polar(1.0, t * self.k[j]);
            acc += kern * (self.wa[j] * ph + self.we[j] * ph.conj());
        }
        acc
    }
}

fn require_radial(spec: &BathSpec) -> Result<(), BathError> {
    if spec.is_radial_linear() {
        Ok(())
    } else {
        Err(BathError::UnsupportedDispersion {
            label: spec.label.clone(),
            reason: "decay scans use the Bessel reduction and need ν(q) = |q|".into(),
        })
    }
}

/// For each t, the sup of |f| over lattice points with |x| ≥ t/2 and the max
/// over |x| < t/2, scanned on the box |x|∞ ≤ `box_radius`.
pub fn decay_profile(spec: &BathSpec, t_grid: &[f64], box_radius: i64) -> Result<Vec<DecayRow>, BathError> {
    require_radial(spec)?;
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if (box_radius as f64) < t_max / 2.0 {
        return Err(BathError::InvalidSpec {
            label: spec.label.clone(),
            reason: format!("box radius {box_radius} cannot represent |x| = {}", t_max / 2.0),
        });
    }
    let radii = lattice_radii(spec.dimension, box_radius);
    let rho_max = radii.last().copied().unwrap_or(0.0);
    let dim = spec.dimension;
    Ok(t_grid
        .par_iter()
        .map(|&t| {
            let grid = RadialGrid::new(spec, t, rho_max);
            let mut row = DecayRow { t, outer_sup: 0.0, outer_argmax: 0.0, inner_max: 0.0, inner_argmax: 0.0 };
            for &rho in &radii {
                let v = grid.eval(dim, rho, t).norm();
                if rho >= t / 2.0 {
                    if v > row.outer_sup {
                        row.outer_sup = v;
                        row.outer_argmax = rho;
                    }
                } else if v > row.inner_max {
                    row.inner_max = v;
                    row.inner_argmax = rho;
                }
            }
            row
        })
        .collect())
}

/// `sup_x |f(x,t)|` over the box, for each t.
pub fn sup_profile(spec: &BathSpec, t_grid: &[f64], box_radius: i64) -> Result<Vec<(f64, f64)>, BathError> {
    Ok(decay_profile(spec, t_grid, box_radius)?
        .into_iter()
        .map(|row| (row.t, row.outer_sup.max(row.inner_max)))
        .collect())
}

/// Log–log slopes of both envelopes over `t ∈ [t_lo, t_hi]`.
pub fn fit_decay(rows: &[DecayRow], t_lo: f64, t_hi: f64) -> DecayExponents {
    let sel: Vec<&DecayRow> = rows.iter().filter(|r| r.t >= t_lo && r.t <= t_hi).collect();
    let t: Vec<f64> = sel.iter().map(|r| r.t).collect();
    let outer: Vec<f64> = sel.iter().map(|r| r.outer_sup).collect();
    let inner: Vec<f64> = sel.iter().map(|r| r.inner_max).collect();
    DecayExponents { outer: fit_power_law(&t, &outer), inner: fit_power_law(&t, &inner) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::bessel_correlation;

    #[test]
    fn radii_are_distinct_and_sorted() {
        let r = lattice_radii(2, 2);
        // 0,1,√2,2,√5,√8
        assert_eq!(r.len(), 6);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fixed_grid_agrees_with_adaptive() {
        let spec = BathSpec::smooth_bump(2, 2.0, 1.0, Some(1.0)).unwrap();
        let grid = RadialGrid::new(&spec, 30.0, 40.0);
        for (rho, x) in [(5.0f64, [3i64, 4i64]), (13.0, [5, 12])] {
            let a = grid.eval(2, rho, 30.0);
            let b = bessel_correlation(&spec, &x, 30.0).unwrap();
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }
}
