use num_complex::Complex64;
use serde::Serialize;

use super::hopping::HoppingSpec;
use super::internal::InternalSystem;
use super::lattice::{euclidean, PeriodicBox};
use super::ParticleError;
use crate::numerics::linalg::{expm, spectral_norm};
use crate::CMatrix;

/// Boundary weight above which a scan is declared wrapped.
const WRAP_TOLERANCE: f64 = 1e-8;
/// Largest dense propagator the scan will build.
const MAX_DENSE: usize = 2048;

#[derive(Debug, Clone, Serialize)]
pub struct PropagationScan {
    /// Smallest κ with `‖⟨x|e^{-itH_P}|y⟩‖ ≤ e^{κλ^α|t|} e^{-|x-y|}` over the scan.
    pub kappa: f64,
    /// Per-time contributions `(t, κ_t)`; t = 0 imposes no constraint.
    pub per_time: Vec<(f64, f64)>,
}

/// Scans the blocks of `e^{-itH_P}`, `H_P = λ^α H_hop + S`, from the origin.
pub fn propagation_bound_scan(
    h: &HoppingSpec,
    sys: &InternalSystem,
    lambda: f64,
    alpha: f64,
    t_grid: &[f64],
    lattice: &PeriodicBox,
) -> Result<PropagationScan, ParticleError> {
    let n = sys.dim();
    if h.internal_dim() != n || h.dim() != lattice.dim {
        return Err(ParticleError::DimensionMismatch("hopping, internal space and box disagree".into()));
    }
    let size = lattice.sites() * n;
    if size > MAX_DENSE {
        return Err(ParticleError::InvalidBox(format!("dense propagator of size {size} exceeds {MAX_DENSE}")));
    }
    let scale = lambda.powf(alpha);
    let mut hp = h.dense(lattice) * Complex64::new(scale, 0.0);
    for site in 0..lattice.sites() {
        for a in 0..n {
            for b in 0..n {
                hp[(site * n + a, site * n + b)] += sys.hamiltonian()[(a, b)];
            }
        }
    }
    let origin = lattice.origin();
    let mut per_time = Vec::with_capacity(t_grid.len());
    let mut kappa = f64::NEG_INFINITY;
    for &t in t_grid {
        let u = expm(&(&hp * Complex64::new(0.0, -t)));
        let mut boundary = 0.0;
        let mut k_t = f64::NEG_INFINITY;
        for y in 0..lattice.sites() {
            let block = CMatrix::from_fn(n, n, |a, b| u[(origin * n + a, y * n + b)]);
            let norm = spectral_norm(&block);
            if lattice.on_boundary(y) {
                boundary += norm * norm;
            }
            if t != 0.0 && scale > 0.0 && norm > 0.0 {
                let dist = euclidean(&lattice.displacement(origin, y));
                k_t = k_t.max((norm.ln() + dist) / (scale * t.abs()));
            }
        }
        if boundary > WRAP_TOLERANCE {
            return Err(ParticleError::WrapAround { t, mass: boundary });
        }
        if t != 0.0 {
            kappa = kappa.max(k_t);
        }
        per_time.push((t, k_t));
    }
    Ok(PropagationScan { kappa, per_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::build_laplacian;

    #[test]
    fn identity_at_time_zero() {
        let lat = PeriodicBox::new(1, 9).unwrap();
        let sys = InternalSystem::two_level(1.0).unwrap();
        let scan = propagation_bound_scan(&build_laplacian(1, 2), &sys, 0.5, 2.0, &[0.0], &lat).unwrap();
        assert_eq!(scan.per_time[0].1, f64::NEG_INFINITY);
    }

    #[test]
    fn zero_coupling_is_site_diagonal() {
        let lat = PeriodicBox::new(1, 9).unwrap();
        let sys = InternalSystem::two_level(1.0).unwrap();
        let scan = propagation_bound_scan(&build_laplacian(1, 2), &sys, 0.0, 2.0, &[0.5, 1.0], &lat).unwrap();
        assert!(scan.per_time.iter().all(|(_, k)| *k == f64::NEG_INFINITY));
    }

    #[test]
    fn detects_wrap_around() {
        let lat = PeriodicBox::new(1, 9).unwrap();
        let sys = InternalSystem::new(CMatrix::zeros(1, 1), vec![]).unwrap();
        let res = propagation_bound_scan(&build_laplacian(1, 1), &sys, 1.0, 0.0, &[5.0], &lat);
        assert!(matches!(res, Err(ParticleError::WrapAround { .. })));
    }
}
