use serde::Serialize;

use super::KineticError;
use crate::bath::{shell_weight, BathSpec};
use crate::numerics::bessel::sphere_area;
use crate::particle::InternalSystem;

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    /// Shell radius `|E_to - E_from|`.
    pub radius: f64,
    /// Total rate `Γ(from → to)`.
    pub rate: f64,
    /// `Σ_i |⟨to|W_i|from⟩|²`.
    pub matrix_element: f64,
}

/// Total transition rates between eigenvectors of S (ascending energies).
/// Momentum transfers are uniform on the sphere of radius `|ΔE|`.
#[derive(Debug, Clone, Serialize)]
pub struct JumpRates {
    pub dim: usize,
    pub energies: Vec<f64>,
    pub transitions: Vec<Transition>,
}

impl JumpRates {
    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.transitions.iter().filter(|t| t.from == from && t.to == to).map(|t| t.rate).sum()
    }

    pub fn exit_rate(&self, from: usize) -> f64 {
        self.transitions.iter().filter(|t| t.from == from).map(|t| t.rate).sum()
    }

    pub fn outgoing(&self, from: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.from == from)
    }

    /// Smallest nonzero shell radius.
    pub fn min_radius(&self) -> Option<f64> {
        self.transitions.iter().map(|t| t.radius).reduce(f64::min)
    }
}

/// Rates from baths paired with the couplings of `sys`.
pub fn build_rates(baths: &[BathSpec], sys: &InternalSystem) -> Result<JumpRates, KineticError> {
    if baths.len() != sys.couplings().len() {
        return Err(KineticError::Invalid(format!(
            "{} baths but {} couplings",
            baths.len(),
            sys.couplings().len()
        )));
    }
    let dim = baths.first().map_or(1, |b| b.dimension);
    if baths.iter().any(|b| b.dimension != dim) {
        return Err(KineticError::Invalid("all baths must share one momentum dimension".into()));
    }
    let energies = sys.energies().to_vec();
    if !sys.is_nondegenerate() {
        if sys.levels().len() == 1 {
            // Every Bohr frequency vanishes, so nothing can jump.
            return Ok(JumpRates { dim, energies, transitions: Vec::new() });
        }
        let levels = sys.levels().iter().filter(|l| l.members.len() > 1).map(|l| l.energy).collect();
        return Err(KineticError::DegenerateSpectrum { levels });
    }
    let n = sys.dim();
    let couplings: Vec<_> = sys.couplings().iter().map(|w| sys.to_eigenbasis(w)).collect();
    let mut transitions = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let omega = energies[to] - energies[from];
            let mut rate = 0.0;
            let mut element = 0.0;
            for (spec, w) in baths.iter().zip(&couplings) {
                let m = w[(to, from)].norm_sqr();
                if m == 0.0 {
                    continue;
                }
                element += m;
                rate += m * shell_weight(spec, omega)? * sphere_area(dim, omega.abs());
            }
            if rate > 0.0 {
                transitions.push(Transition { from, to, radius: omega.abs(), rate, matrix_element: element });
            }
        }
    }
    Ok(JumpRates { dim, energies, transitions })
}
