//! Dense superoperator of the generator for small boxes, used as a test oracle.

use num_complex::Complex64;

use super::generator::LindbladGenerator;
use super::LindbladError;
use crate::particle::PeriodicBox;
use crate::CMatrix;

/// Largest `(|Λ|·N)²` accepted.
const MAX_SUPEROPERATOR: usize = 4096;

/// Column-stacking vectorisation.
pub fn vec_of(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Matrix of `ρ ↦ L♮ρ` acting on `vec(ρ)`, with ρ indexed by `site·N + s` in
/// the standard basis. Offsets are taken as minimum images.
pub fn dense_generator(generator: &LindbladGenerator, lattice: PeriodicBox) -> Result<CMatrix, LindbladError> {
    let n = generator.system.dim();
    let sites = lattice.sites();
    let d = sites * n;
    if d * d > MAX_SUPEROPERATOR {
        return Err(LindbladError::Invalid(format!("superoperator of size {} is too large", d * d)));
    }
    if (lattice.side as i64) < 2 * generator.r_trunc + 1 {
        return Err(LindbladError::BoxTooSmall(format!("side {} below 2·{}+1", lattice.side, generator.r_trunc)));
    }
    let id = CMatrix::identity(d, d);
    let id_sites = CMatrix::identity(sites, sites);
    let mut ham = generator.lamb.kronecker(&id_sites);
    ham = permute_internal_last(&ham, sites, n);
    if let Some(h) = &generator.hopping {
        ham += h.dense(&lattice);
    }
    let mut anti = CMatrix::zeros(d, d);
    let i = Complex64::new(0.0, 1.0);
    let mut out = (id.kronecker(&ham) - ham.transpose().kronecker(&id)) * -i;
    for ch in &generator.channels {
        let c0 = ch.kernel.origin();
        let w = &ch.jump;
        anti += permute_internal_last(&(w.adjoint() * w).kronecker(&id_sites), sites, n) * Complex64::new(0.5 * c0, 0.0);
        for x in 0..sites {
            for y in 0..sites {
                let delta = lattice.displacement(x, y);
                let Some(idx) = ch.kernel.offsets.iter().position(|o| *o == delta) else { continue };
                let cv = ch.kernel.values[idx];
                if cv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for a in 0..n {
                    for c in 0..n {
                        for b in 0..n {
                            for e in 0..n {
                                let v = cv * w[(a, c)] * w[(b, e)].conj();
                                if v == Complex64::new(0.0, 0.0) {
                                    continue;
                                }
                                let row = (y * n + b) * d + x * n + a;
                                let col = (y * n + e) * d + x * n + c;
                                out[(row, col)] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    out -= id.kronecker(&anti) + anti.transpose().kronecker(&id);
    Ok(out)
}

/// Reorders `A ⊗ 1_sites` (internal index slow) to `site·N + s` ordering.
fn permute_internal_last(m: &CMatrix, sites: usize, n: usize) -> CMatrix {
    let d = sites * n;
    let idx = |k: usize| (k % sites) * n + k / sites;
    let mut out = CMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            out[(idx(r), idx(c))] = m[(r, c)];
        }
    }
    out
}
