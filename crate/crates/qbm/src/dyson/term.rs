use num_complex::Complex64;
use serde::Serialize;

use super::model::{DysonBox, Side};
use super::pairing::{Pairing, VertexRole};
use super::DysonError;
use crate::CMatrix;
use crate::numerics::linalg::spectral_norm;

/// Relative slack on the per-term norm bound.
const BOUND_SLACK: f64 = 1e-10;

/// One integrand of the order-`n` Dyson term at fixed times, sites and sides.
#[derive(Debug, Clone, Serialize)]
pub struct DysonTerm {
    pub lambda: f64,
    pub pairing: Pairing,
    pub times: Vec<f64>,
    pub sites: Vec<usize>,
    pub sides: Vec<Side>,
}

/// `T ↦ coefficient · left · T · right`, which is the shape every term takes.
#[derive(Debug, Clone)]
pub struct TermValue {
    pub coefficient: Complex64,
    pub left: CMatrix,
    pub right: CMatrix,
    /// `(λ‖W‖)^{2n} e^{4λ²t} Π|f|`.
    pub bound: f64,
}

impl TermValue {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        &self.left * rho * &self.right * self.coefficient
    }

    /// Trace-norm operator norm, exact for a two-sided product.
    pub fn norm(&self) -> f64 {
        self.coefficient.norm() * spectral_norm(&self.left) * spectral_norm(&self.right)
    }

    /// Matrix on column-stacked `vec(T)`: `vec(LTR) = (Rᵀ ⊗ L) vec(T)`.
    pub fn superoperator(&self) -> CMatrix {
        self.right.transpose().kronecker(&self.left) * self.coefficient
    }
}

impl DysonTerm {
    pub fn new(
        lambda: f64,
        pairing: Pairing,
        times: Vec<f64>,
        sites: Vec<usize>,
        sides: Vec<Side>,
    ) -> Result<Self, DysonError> {
        let len = 2 * pairing.n;
        if times.len() != len || sites.len() != len || sides.len() != len {
            return Err(DysonError::Invalid(format!("an order-{} term takes {len} vertices", pairing.n)));
        }
        if times.windows(2).any(|w| w[0] > w[1]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(DysonError::Invalid("vertex times must be ordered and non-negative".into()));
        }
        Ok(Self { lambda, pairing, times, sites, sides })
    }

    /// Value on the box, with the per-term bound checked.
    pub fn evaluate(&self, system: &DysonBox) -> Result<TermValue, DysonError> {
        let dim = system.dim();
        if let Some(&s) = self.sites.iter().find(|&&s| s >= system.lattice.sites()) {
            return Err(DysonError::Invalid(format!("site {s} outside the box")));
        }
        let n = self.pairing.n;
        let mut left = CMatrix::identity(dim, dim);
        let mut right = CMatrix::identity(dim, dim);
        let mut sign = 1.0;
        for j in 0..2 * n {
            let v = system.heisenberg(&system.site_coupling(self.sites[j]), self.times[j]);
            match self.sides[j] {
                Side::Left => left = v * left,
                Side::Right => {
                    right *= v;
                    sign = -sign;
                }
            }
        }
        let mut coefficient = Complex64::new(sign * (-self.lambda * self.lambda).powi(n as i32), 0.0);
        let mut weight = 1.0;
        for (j, role) in self.pairing.roles().into_iter().enumerate() {
            let VertexRole::Opens(m) = role else { continue };
            let closer = self.pairing.pairs[m].1;
            debug_assert_eq!(self.pairing.pairs[m].0, j);
            let dx = system.separation(self.sites[j], self.sites[closer]);
            let f = system.correlation_sided(&dx, self.times[closer] - self.times[j], self.sides[j])?;
            coefficient *= f;
            weight *= f.norm();
        }
        let t = self.times.last().copied().unwrap_or(0.0);
        let lambda_sq = self.lambda * self.lambda;
        let bound =
            (self.lambda * system.coupling_norm()).powi(2 * n as i32) * (4.0 * lambda_sq * t).exp() * weight;
        let value = TermValue { coefficient, left, right, bound };
        let norm = value.norm();
        if norm > bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE {
            return Err(DysonError::BoundViolated { norm, bound });
        }
        Ok(value)
    }
}
