use std::f64::consts::PI;

use serde::Serialize;

use super::KineticError;

/// Uniform grid of `M^d` momenta `k_j = 2π(j - M/2)/M` on the torus; cell `j`
/// covers `[k_j - Δ/2, k_j + Δ/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MomentumGrid {
    pub dim: usize,
    pub m: usize,
}

impl MomentumGrid {
    pub fn new(dim: usize, m: usize) -> Result<Self, KineticError> {
        if dim == 0 || m < 2 || !m.is_multiple_of(2) {
            return Err(KineticError::Invalid(format!("grid needs d ≥ 1 and even M ≥ 2, got d={dim}, M={m}")));
        }
        Ok(Self { dim, m })
    }

    pub fn points(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    pub fn momentum(&self, j: usize) -> f64 {
        self.spacing() * (j as f64 - (self.m / 2) as f64)
    }

    /// Per-axis cell indices of a flat index, first axis slowest.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.m;
            idx /= self.m;
        }
        out
    }

    pub fn flatten(&self, cells: &[i64]) -> usize {
        let m = self.m as i64;
        cells.iter().fold(0usize, |acc, &c| acc * self.m + c.rem_euclid(m) as usize)
    }

    /// Cell containing the continuous momentum `k` (any real value).
    pub fn cell_of(&self, k: f64) -> usize {
        let d = self.spacing();
        let j = ((k + PI + 0.5 * d) / d).floor() as i64;
        j.rem_euclid(self.m as i64) as usize
    }

    pub fn index_of(&self, k: &[f64]) -> usize {
        let cells: Vec<i64> = k.iter().map(|&x| self.cell_of(x) as i64).collect();
        self.flatten(&cells)
    }
}

/// `ρ(k, s)` on a [`MomentumGrid`], normalised so that the mean over grid
/// points summed over levels is one.
#[derive(Debug, Clone, Serialize)]
pub struct MomentumDensity {
    pub grid: MomentumGrid,
    pub levels: usize,
    /// Level-major values: `values[s·M^d + idx]`.
    pub values: Vec<f64>,
}

impl MomentumDensity {
    pub fn zeros(grid: MomentumGrid, levels: usize) -> Self {
        Self { grid, levels, values: vec![0.0; levels * grid.points()] }
    }

    /// Uniform in k with the given level weights (normalised here).
    pub fn uniform(grid: MomentumGrid, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut out = Self::zeros(grid, weights.len());
        let p = grid.points();
        for (s, w) in weights.iter().enumerate() {
            out.values[s * p..(s + 1) * p].iter_mut().for_each(|v| *v = w / total);
        }
        out
    }

    /// Gibbs weights `e^{-βE_s}` times the uniform momentum density.
    pub fn gibbs_uniform(grid: MomentumGrid, energies: &[f64], beta: f64) -> Self {
        let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        Self::uniform(grid, &w)
    }

    /// All mass in one grid cell and level.
    pub fn point(grid: MomentumGrid, levels: usize, idx: usize, level: usize) -> Self {
        let mut out = Self::zeros(grid, levels);
        out.values[level * grid.points() + idx] = grid.points() as f64;
        out
    }

    pub fn level(&self, s: usize) -> &[f64] {
        let p = self.grid.points();
        &self.values[s * p..(s + 1) * p]
    }

    /// `Σ_s Σ_k Δk ρ(k,s) / (2π)^d`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.points() as f64
    }

    pub fn level_marginals(&self) -> Vec<f64> {
        let p = self.grid.points() as f64;
        (0..self.levels).map(|s| self.level(s).iter().sum::<f64>() / p).collect()
    }

    /// Marginal along `axis` in `bins` equal groups of grid cells.
    pub fn axis_marginal(&self, axis: usize, bins: usize) -> Vec<f64> {
        let per = self.grid.m / bins;
        let p = self.grid.points() as f64;
        let mut out = vec![0.0; bins];
        for s in 0..self.levels {
            for (idx, v) in self.level(s).iter().enumerate() {
                out[self.grid.unflatten(idx)[axis] / per] += v / p;
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
