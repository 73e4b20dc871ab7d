use std::collections::BTreeMap;

use num_complex::Complex64;

use super::internal::{InternalSystem, RATCHET_LEFT, RATCHET_RIGHT};
use super::lattice::{sup_norm, PeriodicBox};
use super::ParticleError;
use crate::numerics::linalg::max_abs;
use crate::CMatrix;

/// `(y, z)` lattice sites of a local kernel entry.
pub type SitePair = (Vec<i64>, Vec<i64>);

/// Translation-invariant hopping operator stored as offset blocks:
/// `⟨y|H|z⟩ = K(y - z)`, an N×N block.
#[derive(Debug, Clone)]
pub struct HoppingSpec {
    dim: usize,
    internal: usize,
    blocks: BTreeMap<Vec<i64>, CMatrix>,
}

impl HoppingSpec {
    pub fn new(dim: usize, internal: usize, blocks: Vec<(Vec<i64>, CMatrix)>) -> Result<Self, ParticleError> {
        let mut map: BTreeMap<Vec<i64>, CMatrix> = BTreeMap::new();
        for (offset, block) in blocks {
            if offset.len() != dim || block.nrows() != internal || block.ncols() != internal {
                return Err(ParticleError::DimensionMismatch(format!(
                    "hopping block at {offset:?} does not match d={dim}, N={internal}"
                )));
            }
            let slot = map.entry(offset).or_insert_with(|| CMatrix::zeros(internal, internal));
            *slot += block;
        }
        let spec = Self { dim, internal, blocks: map };
        spec.check_self_adjoint()?;
        Ok(spec)
    }

    /// Translation average of a finite kernel `h(y, z)`:
    /// `K(δ) = Σ_{y - z = δ} h(y, z)`.
    pub fn from_local_kernel(
        dim: usize,
        internal: usize,
        entries: Vec<(SitePair, CMatrix)>,
    ) -> Result<Self, ParticleError> {
        let blocks = entries
            .into_iter()
            .map(|((y, z), b)| (y.iter().zip(&z).map(|(a, c)| a - c).collect(), b))
            .collect();
        Self::new(dim, internal, blocks)
    }

    fn check_self_adjoint(&self) -> Result<(), ParticleError> {
        let zero = CMatrix::zeros(self.internal, self.internal);
        let mut worst: f64 = 0.0;
        for (offset, block) in &self.blocks {
            let neg: Vec<i64> = offset.iter().map(|c| -c).collect();
            let partner = self.blocks.get(&neg).unwrap_or(&zero);
            worst = worst.max(max_abs(&(block - partner.adjoint())));
        }
        if worst > 1e-14 {
            return Err(ParticleError::NotHermitian { what: "hopping kernel".into(), asymmetry: worst });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn internal_dim(&self) -> usize {
        self.internal
    }

    /// Largest `|δ|∞` carrying a nonzero block.
    pub fn range(&self) -> i64 {
        self.blocks
            .iter()
            .filter(|(_, b)| max_abs(b) > 0.0)
            .map(|(o, _)| sup_norm(o))
            .max()
            .unwrap_or(0)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&Vec<i64>, &CMatrix)> {
        self.blocks.iter()
    }

    pub fn block(&self, offset: &[i64]) -> Option<&CMatrix> {
        self.blocks.get(offset)
    }

    /// Bloch symbol `Σ_δ K(δ) e^{-ik·δ}`: the action on `e^{ik·x} v`.
    pub fn symbol(&self, k: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.internal, self.internal);
        for (offset, block) in &self.blocks {
            let phase: f64 = offset.iter().zip(k).map(|(&a, b)| a as f64 * b).sum();
            out += block * Complex64::from_polar(1.0, -phase);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            internal: self.internal,
            blocks: self.blocks.iter().map(|(o, b)| (o.clone(), b * Complex64::new(factor, 0.0))).collect(),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self {
            dim: self.dim,
            internal: self.internal,
            blocks: self.blocks.iter().map(|(o, b)| (o.clone(), f(b))).collect(),
        }
    }

    /// Dense `|Λ|N × |Λ|N` matrix on a periodic box, index `site·N + s`.
    pub fn dense(&self, lattice: &PeriodicBox) -> CMatrix {
        assert_eq!(lattice.dim, self.dim, "box and kernel dimensions differ");
        let n = self.internal;
        let size = lattice.sites() * n;
        let mut out = CMatrix::zeros(size, size);
        for z in 0..lattice.sites() {
            for (offset, block) in &self.blocks {
                let y = lattice.shift(z, offset);
                for a in 0..n {
                    for b in 0..n {
                        out[(y * n + a, z * n + b)] += block[(a, b)];
                    }
                }
            }
        }
        out
    }
}

/// Nearest-neighbour Laplacian: `2d·1` at offset 0 and `-1` at each unit offset.
pub fn build_laplacian(dim: usize, internal: usize) -> HoppingSpec {
    let id = CMatrix::identity(internal, internal);
    let mut blocks = vec![(vec![0; dim], &id * Complex64::new(2.0 * dim as f64, 0.0))];
    for axis in 0..dim {
        for sign in [-1, 1] {
            let mut e = vec![0; dim];
            e[axis] = sign;
            blocks.push((e, -&id));
        }
    }
    HoppingSpec::new(dim, internal, blocks).expect("Laplacian is self-adjoint")
}

/// Ratchet hopping along `e₁`: `-|→⟩⟨←|` at offset `-e₁` and `-|←⟩⟨→|` at `+e₁`
/// in the basis (↑, ↓, →, ←).
pub fn build_ratchet(dim: usize) -> HoppingSpec {
    let mut right_left = CMatrix::zeros(4, 4);
    right_left[(RATCHET_RIGHT, RATCHET_LEFT)] = Complex64::new(-1.0, 0.0);
    let left_right = right_left.adjoint();
    let mut minus = vec![0; dim];
    minus[0] = -1;
    let mut plus = vec![0; dim];
    plus[0] = 1;
    HoppingSpec::new(dim, 4, vec![(minus, right_left), (plus, left_right)]).expect("ratchet hopping is self-adjoint")
}

/// Keeps only the parts of each block that connect equal energies of S.
pub fn spectral_average_hopping(h: &HoppingSpec, sys: &InternalSystem) -> Result<HoppingSpec, ParticleError> {
    if h.internal_dim() != sys.dim() {
        return Err(ParticleError::DimensionMismatch(format!(
            "hopping acts on N={} but S has N={}",
            h.internal_dim(),
            sys.dim()
        )));
    }
    Ok(h.map_blocks(|b| sys.level_diagonal(b)))
}
