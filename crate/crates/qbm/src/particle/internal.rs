use num_complex::Complex64;

use super::ParticleError;
use crate::numerics::linalg::{hermitian_eigen, spectral_norm};
use crate::CMatrix;

/// Relative tolerance that defines degenerate eigenvalues.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// A cluster of degenerate eigenvalues of S.
#[derive(Debug, Clone)]
pub struct Level {
    pub energy: f64,
    /// Column indices into the eigenvector matrix.
    pub members: Vec<usize>,
    /// Orthogonal projector onto the eigenspace.
    pub projector: CMatrix,
}

/// Internal Hamiltonian S with its couplings and eigen-structure.
#[derive(Debug, Clone)]
pub struct InternalSystem {
    hamiltonian: CMatrix,
    couplings: Vec<CMatrix>,
    energies: Vec<f64>,
    vectors: CMatrix,
    levels: Vec<Level>,
    level_of: Vec<usize>,
    /// Sorted Bohr frequencies with the (level, level) pairs realising each.
    bohr: Vec<(f64, Vec<(usize, usize)>)>,
    eps_deg: f64,
    merge_tol: f64,
}

fn exact_asymmetry(m: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != m[(j, i)].conj() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm()).max(f64::MIN_POSITIVE);
            }
        }
    }
    worst
}

fn check_hermitian(what: &str, m: &CMatrix) -> Result<(), ParticleError> {
    if m.nrows() != m.ncols() {
        return Err(ParticleError::DimensionMismatch(format!("{what} is not square")));
    }
    let asymmetry = exact_asymmetry(m);
    if asymmetry > 0.0 {
        return Err(ParticleError::NotHermitian { what: what.into(), asymmetry });
    }
    Ok(())
}

/// Groups sorted values into clusters; gaps in `(merge_tol, eps]` are ambiguous.
fn cluster(values: &[f64], merge_tol: f64, eps: f64) -> Result<Vec<Vec<usize>>, ParticleError> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - values[*g.last().unwrap()] <= merge_tol.max(eps) => {
                let prev = values[*g.last().unwrap()];
                if v - prev > merge_tol {
                    return Err(ParticleError::DegeneracyAmbiguity { a: prev, b: v, tol: eps });
                }
                g.push(i);
            }
            _ => groups.push(vec![i]),
        }
    }
    Ok(groups)
}

impl InternalSystem {
    /// Builds the eigen-structure of `hamiltonian`. Inputs must be exactly Hermitian.
    pub fn new(hamiltonian: CMatrix, couplings: Vec<CMatrix>) -> Result<Self, ParticleError> {
        check_hermitian("S", &hamiltonian)?;
        let n = hamiltonian.nrows();
        for (i, w) in couplings.iter().enumerate() {
            if w.nrows() != n {
                return Err(ParticleError::DimensionMismatch(format!(
                    "coupling {i} is {}x{} but S is {n}x{n}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            check_hermitian(&format!("coupling {i}"), w)?;
        }
        let norm = spectral_norm(&hamiltonian);
        let eps_deg = DEGENERACY_RTOL * norm;
        let merge_tol = 64.0 * f64::EPSILON * norm.max(1.0);
        let (energies, vectors) = hermitian_eigen(&hamiltonian);
        let groups = cluster(&energies, merge_tol, eps_deg)?;
        let mut level_of = vec![0; n];
        let levels: Vec<Level> = groups
            .into_iter()
            .enumerate()
            .map(|(l, members)| {
                let energy = members.iter().map(|&m| energies[m]).sum::<f64>() / members.len() as f64;
                let mut projector = CMatrix::zeros(n, n);
                for &m in &members {
                    level_of[m] = l;
                    let v = vectors.column(m);
                    projector += v * v.adjoint();
                }
                Level { energy, members, projector }
            })
            .collect();
        let mut raw: Vec<(f64, (usize, usize))> = Vec::new();
        for (a, la) in levels.iter().enumerate() {
            for (b, lb) in levels.iter().enumerate() {
                raw.push((la.energy - lb.energy, (a, b)));
            }
        }
        raw.sort_by(|x, y| x.0.total_cmp(&y.0));
        let freqs: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let groups = cluster(&freqs, merge_tol, eps_deg)?;
        let bohr = groups
            .into_iter()
            .map(|g| {
                let pairs: Vec<(usize, usize)> = g.iter().map(|&i| raw[i].1).collect();
                let omega = if pairs.iter().any(|(a, b)| a == b) {
                    0.0
                } else {
                    g.iter().map(|&i| raw[i].0).sum::<f64>() / g.len() as f64
                };
                (omega, pairs)
            })
            .collect();
        Ok(Self { hamiltonian, couplings, energies, vectors, levels, level_of, bohr, eps_deg, merge_tol })
    }

    /// `S = diag(ε/2, -ε/2)` in the basis (+, −) with one σ_x coupling.
    pub fn two_level(epsilon: f64) -> Result<Self, ParticleError> {
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(epsilon / 2.0, 0.0),
            Complex64::new(-epsilon / 2.0, 0.0),
        ]));
        Self::new(s, vec![sigma_x()])
    }

    /// `S = diag(ε, -ε, 0, 0)` in the basis (↑, ↓, →, ←) with the two ratchet couplings.
    pub fn ratchet(epsilon: f64) -> Result<Self, ParticleError> {
        Self::new(ratchet_hamiltonian(epsilon), vec![ratchet_bath_1(), ratchet_bath_2()])
    }

    pub fn with_couplings(&self, couplings: Vec<CMatrix>) -> Result<Self, ParticleError> {
        Self::new(self.hamiltonian.clone(), couplings)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn couplings(&self) -> &[CMatrix] {
        &self.couplings
    }

    pub fn coupling(&self, i: usize) -> &CMatrix {
        &self.couplings[i]
    }

    /// Eigenvalues in ascending order.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::energies`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Level index of each eigenvector.
    pub fn level_of(&self) -> &[usize] {
        &self.level_of
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.levels.len() == self.dim()
    }

    pub fn degeneracy_tolerance(&self) -> f64 {
        self.eps_deg
    }

    pub fn bohr_frequencies(&self) -> Vec<f64> {
        self.bohr.iter().map(|b| b.0).collect()
    }

    /// Bohr-sector index of each eigenvector pair `(a, b)`, row-major `a·N + b`.
    pub fn sector_map(&self) -> Vec<usize> {
        let n = self.dim();
        let mut out = vec![0; n * n];
        for (idx, (_, pairs)) in self.bohr.iter().enumerate() {
            for &(la, lb) in pairs {
                for &a in &self.levels[la].members {
                    for &b in &self.levels[lb].members {
                        out[a * n + b] = idx;
                    }
                }
            }
        }
        out
    }

    fn bohr_index(&self, omega: f64) -> Result<usize, ParticleError> {
        let tol = self.merge_tol.max(self.eps_deg);
        self.bohr
            .iter()
            .position(|(w, _)| (w - omega).abs() <= tol)
            .ok_or(ParticleError::UnknownBohrFrequency { omega })
    }

    /// `P_ω(T) = Σ_{E_a - E_b = ω} P_a T P_b`.
    pub fn project(&self, omega: f64, t: &CMatrix) -> Result<CMatrix, ParticleError> {
        let idx = self.bohr_index(omega)?;
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for &(a, b) in &self.bohr[idx].1 {
            out += &self.levels[a].projector * t * &self.levels[b].projector;
        }
        Ok(out)
    }

    /// Block-diagonal part `Σ_a P_a T P_a`.
    pub fn level_diagonal(&self, t: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for l in &self.levels {
            out += &l.projector * t * &l.projector;
        }
        out
    }

    /// Matrix `U† T U` in the eigenbasis.
    pub fn to_eigenbasis(&self, t: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * t * &self.vectors
    }

    pub fn from_eigenbasis(&self, t: &CMatrix) -> CMatrix {
        &self.vectors * t * self.vectors.adjoint()
    }
}

/// All components `ω ↦ W_{i,ω}` over the Bohr spectrum, zeros included.
pub fn jump_components(sys: &InternalSystem, bath: usize) -> Vec<(f64, CMatrix)> {
    let w = sys.coupling(bath);
    sys.bohr
        .iter()
        .map(|(omega, _)| (*omega, sys.project(*omega, w).expect("listed Bohr frequency")))
        .collect()
}

/// `P_ω(T)`; errors on frequencies outside the Bohr spectrum.
pub fn spectral_projector(sys: &InternalSystem, omega: f64, t: &CMatrix) -> Result<CMatrix, ParticleError> {
    sys.project(omega, t)
}

pub const RATCHET_UP: usize = 0;
pub const RATCHET_DOWN: usize = 1;
pub const RATCHET_RIGHT: usize = 2;
pub const RATCHET_LEFT: usize = 3;

fn ket_bra(n: usize, pairs: &[(usize, usize)]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for &(a, b) in pairs {
        m[(a, b)] += Complex64::new(1.0, 0.0);
    }
    m
}

pub fn sigma_x() -> CMatrix {
    ket_bra(2, &[(0, 1), (1, 0)])
}

fn ratchet_hamiltonian(epsilon: f64) -> CMatrix {
    let mut s = CMatrix::zeros(4, 4);
    s[(RATCHET_UP, RATCHET_UP)] = Complex64::new(epsilon, 0.0);
    s[(RATCHET_DOWN, RATCHET_DOWN)] = Complex64::new(-epsilon, 0.0);
    s
}

/// `|↑⟩⟨→| + |↓⟩⟨←| + h.c.`
pub fn ratchet_bath_1() -> CMatrix {
    let (u, d, r, l) = (RATCHET_UP, RATCHET_DOWN, RATCHET_RIGHT, RATCHET_LEFT);
    ket_bra(4, &[(u, r), (d, l), (r, u), (l, d)])
}

/// `|↑⟩⟨←| + |↓⟩⟨→| + h.c.`
pub fn ratchet_bath_2() -> CMatrix {
    let (u, d, r, l) = (RATCHET_UP, RATCHET_DOWN, RATCHET_RIGHT, RATCHET_LEFT);
    ket_bra(4, &[(u, l), (d, r), (l, u), (r, d)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::max_abs;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_hamiltonian_has_single_component() {
        let sys = InternalSystem::new(CMatrix::zeros(2, 2), vec![sigma_x()]).unwrap();
        let comps = jump_components(&sys, 0);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].0, 0.0);
        assert!(max_abs(&(&comps[0].1 - sigma_x())) == 0.0);
    }

    #[test]
    fn two_level_components_by_hand() {
        let eps = 1.3;
        let sys = InternalSystem::two_level(eps).unwrap();
        let comps = jump_components(&sys, 0);
        let freqs: Vec<f64> = comps.iter().map(|c| c.0).collect();
        assert_eq!(freqs.len(), 3);
        assert!((freqs[0] + eps).abs() < 1e-15 && freqs[1] == 0.0 && (freqs[2] - eps).abs() < 1e-15);
        // W_{+ε} = |+⟩⟨−|, W_{−ε} = |−⟩⟨+|, W_0 = 0 (basis (+, −)).
        let plus = ket_bra(2, &[(0, 1)]);
        let minus = ket_bra(2, &[(1, 0)]);
        assert!(max_abs(&(&comps[2].1 - plus)) < 1e-15);
        assert!(max_abs(&(&comps[0].1 - minus)) < 1e-15);
        assert!(max_abs(&comps[1].1) < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut s = CMatrix::zeros(2, 2);
        s[(0, 1)] = c(1.0);
        assert!(matches!(InternalSystem::new(s, vec![]), Err(ParticleError::NotHermitian { .. })));
    }

    #[test]
    fn near_degenerate_gap_is_ambiguous() {
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0 + 1e-11), c(-1.0)]));
        assert!(matches!(InternalSystem::new(s, vec![]), Err(ParticleError::DegeneracyAmbiguity { .. })));
    }

    #[test]
    fn unknown_frequency() {
        let sys = InternalSystem::two_level(1.0).unwrap();
        assert!(matches!(
            spectral_projector(&sys, 0.5, &sigma_x()),
            Err(ParticleError::UnknownBohrFrequency { .. })
        ));
    }

    #[test]
    fn ratchet_levels() {
        let sys = InternalSystem::ratchet(1.0).unwrap();
        assert_eq!(sys.levels().len(), 3);
        assert_eq!(sys.bohr_frequencies().len(), 5);
    }
}
