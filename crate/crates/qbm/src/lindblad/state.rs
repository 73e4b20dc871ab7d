use num_complex::Complex64;

use super::LindbladError;
use crate::numerics::linalg::{lanczos_min_eigenvalue, min_hermitian_eigenvalue};
use crate::particle::{InternalSystem, PeriodicBox};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest `|Λ|·N` for which the spot check uses a dense eigensolver.
const DENSE_POSITIVITY_LIMIT: usize = 600;
const LANCZOS_STEPS: usize = 80;

/// Density matrix on `ℓ²(Λ) ⊗ ℂᴺ` in the eigenbasis of S.
///
/// Entry `(a, b)` is an `|Λ|×|Λ|` array, row-major in `(x, y)`. Entries of
/// inactive Bohr sectors are identically zero and not stored.
#[derive(Debug, Clone)]
pub struct LatticeDensityMatrix {
    lattice: PeriodicBox,
    n: usize,
    basis: CMatrix,
    active: Vec<bool>,
    blocks: Vec<Vec<Complex64>>,
}

fn active_sectors(sys: &InternalSystem, content: &CMatrix, all: bool) -> Vec<bool> {
    let n = sys.dim();
    let map = sys.sector_map();
    let scale = content.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut on = vec![false; map.iter().max().map_or(0, |m| m + 1)];
    for a in 0..n {
        for b in 0..n {
            if all || content[(a, b)].norm() > 1e-14 * scale {
                on[map[a * n + b]] = true;
            }
        }
    }
    // Hermiticity pairs ω with -ω.
    for a in 0..n {
        for b in 0..n {
            if on[map[a * n + b]] {
                on[map[b * n + a]] = true;
            }
        }
    }
    map.iter().map(|&s| on[s]).collect()
}

/// Visits `(x, y)` in cache-sized tiles; with `upper` only `y ≥ x`.
fn for_tiles(sites: usize, upper: bool, mut f: impl FnMut(usize, usize)) {
    const TILE: usize = 32;
    for x0 in (0..sites).step_by(TILE) {
        let y_start = if upper { x0 } else { 0 };
        for y0 in (y_start..sites).step_by(TILE) {
            for x in x0..(x0 + TILE).min(sites) {
                let lo = if upper { y0.max(x) } else { y0 };
                for y in lo..(y0 + TILE).min(sites) {
                    f(x, y);
                }
            }
        }
    }
}

impl LatticeDensityMatrix {
    fn empty(sys: &InternalSystem, lattice: PeriodicBox, active: Vec<bool>) -> Self {
        let sites = lattice.sites();
        let blocks = active
            .iter()
            .map(|&on| if on { vec![ZERO; sites * sites] } else { Vec::new() })
            .collect();
        Self { lattice, n: sys.dim(), basis: sys.eigenvectors().clone(), active, blocks }
    }

    /// `|x⟩⟨x| ⊗ σ` with `σ` given in the standard basis.
    pub fn localized(
        sys: &InternalSystem,
        lattice: PeriodicBox,
        site: usize,
        sigma: &CMatrix,
    ) -> Result<Self, LindbladError> {
        let n = sys.dim();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(LindbladError::Invalid(format!("internal state must be {n}x{n}")));
        }
        if site >= lattice.sites() {
            return Err(LindbladError::Invalid(format!("site {site} outside the box")));
        }
        let tilde = sys.to_eigenbasis(sigma);
        let mut out = Self::empty(sys, lattice, active_sectors(sys, &tilde, false));
        let sites = lattice.sites();
        for a in 0..n {
            for b in 0..n {
                if out.active[a * n + b] {
                    out.blocks[a * n + b][site * sites + site] = tilde[(a, b)];
                }
            }
        }
        Ok(out)
    }

    /// Imports a dense matrix indexed by `site·N + s` in the standard basis.
    /// With `all_sectors` every internal entry is stored.
    pub fn from_dense(
        sys: &InternalSystem,
        lattice: PeriodicBox,
        rho: &CMatrix,
        all_sectors: bool,
    ) -> Result<Self, LindbladError> {
        let n = sys.dim();
        let sites = lattice.sites();
        if rho.nrows() != sites * n || rho.ncols() != sites * n {
            return Err(LindbladError::Invalid("dense state has the wrong size".into()));
        }
        let u = sys.eigenvectors();
        let mut blocks = vec![vec![ZERO; sites * sites]; n * n];
        let mut content = CMatrix::zeros(n, n);
        for x in 0..sites {
            for y in 0..sites {
                let sub = rho.view((x * n, y * n), (n, n));
                let t = u.adjoint() * sub * u;
                for a in 0..n {
                    for b in 0..n {
                        blocks[a * n + b][x * sites + y] = t[(a, b)];
                        content[(a, b)] += Complex64::new(t[(a, b)].norm(), 0.0);
                    }
                }
            }
        }
        let active = active_sectors(sys, &content, all_sectors);
        for (i, blk) in blocks.iter_mut().enumerate() {
            if !active[i] {
                *blk = Vec::new();
            }
        }
        Ok(Self { lattice, n, basis: u.clone(), active, blocks })
    }

    pub fn zeros_like(other: &Self) -> Self {
        let mut out = other.clone();
        for b in &mut out.blocks {
            b.iter_mut().for_each(|z| *z = ZERO);
        }
        out
    }

    /// Dense matrix indexed by `site·N + s` in the standard basis.
    pub fn to_dense(&self) -> CMatrix {
        let (n, sites) = (self.n, self.lattice.sites());
        let mut out = CMatrix::zeros(sites * n, sites * n);
        let u = &self.basis;
        let mut t = CMatrix::zeros(n, n);
        for x in 0..sites {
            for y in 0..sites {
                for a in 0..n {
                    for b in 0..n {
                        t[(a, b)] = self.get(a, b, x, y);
                    }
                }
                let s = u * &t * u.adjoint();
                out.view_mut((x * n, y * n), (n, n)).copy_from(&s);
            }
        }
        out
    }

    pub fn lattice(&self) -> PeriodicBox {
        self.lattice
    }

    pub fn internal_dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn is_active(&self, a: usize, b: usize) -> bool {
        self.active[a * self.n + b]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn block(&self, a: usize, b: usize) -> Option<&[Complex64]> {
        let blk = &self.blocks[a * self.n + b];
        (!blk.is_empty()).then_some(blk.as_slice())
    }

    pub(crate) fn blocks(&self) -> &[Vec<Complex64>] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.blocks
    }

    /// Matrix element `⟨x, a| ρ |y, b⟩` in the eigenbasis.
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> Complex64 {
        self.block(a, b).map_or(ZERO, |blk| blk[x * self.lattice.sites() + y])
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.active == other.active
    }

    /// `self += factor·other`.
    pub fn axpy(&mut self, factor: Complex64, other: &Self) {
        debug_assert!(self.same_layout(other));
        for (dst, src) in self.blocks.iter_mut().zip(&other.blocks) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += factor * s;
            }
        }
    }

    /// `self = base + factor·other`.
    pub fn assign_axpy(&mut self, base: &Self, factor: Complex64, other: &Self) {
        for ((dst, b), o) in self.blocks.iter_mut().zip(&base.blocks).zip(&other.blocks) {
            for ((d, x), y) in dst.iter_mut().zip(b).zip(o) {
                *d = x + factor * y;
            }
        }
    }

    pub fn copy_from(&mut self, other: &Self) {
        for (dst, src) in self.blocks.iter_mut().zip(&other.blocks) {
            dst.copy_from_slice(src);
        }
    }

    /// Population of each site, `Σ_a ρ[a,a](x,x)`.
    pub fn site_populations(&self) -> Vec<f64> {
        let sites = self.lattice.sites();
        let mut out = vec![0.0; sites];
        for a in 0..self.n {
            if let Some(blk) = self.block(a, a) {
                for (x, p) in out.iter_mut().enumerate() {
                    *p += blk[x * sites + x].re;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.site_populations().iter().sum()
    }

    /// Population of each eigenvector of S.
    pub fn internal_populations(&self) -> Vec<f64> {
        let sites = self.lattice.sites();
        (0..self.n)
            .map(|a| self.block(a, a).map_or(0.0, |blk| (0..sites).map(|x| blk[x * sites + x].re).sum()))
            .collect()
    }

    /// `⟨x_i⟩` per axis in centred coordinates.
    pub fn mean_position(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.lattice.dim];
        for (x, p) in self.site_populations().iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.lattice.coords(x)) {
                *o += c as f64 * p;
            }
        }
        out
    }

    /// `⟨|x|²⟩` in centred coordinates.
    pub fn second_moment(&self) -> f64 {
        self.site_populations()
            .iter()
            .enumerate()
            .map(|(x, p)| self.lattice.coords(x).iter().map(|&c| (c * c) as f64).sum::<f64>() * p)
            .sum()
    }

    /// Population on the outermost shell of the box.
    pub fn boundary_population(&self) -> f64 {
        self.site_populations()
            .iter()
            .enumerate()
            .filter(|(x, _)| self.lattice.on_boundary(*x))
            .map(|(_, p)| p)
            .sum()
    }

    /// Largest entry of `ρ - ρ†`.
    pub fn asymmetry(&self) -> f64 {
        let sites = self.lattice.sites();
        let mut worst: f64 = 0.0;
        for a in 0..self.n {
            for b in a..self.n {
                let (Some(p), Some(q)) = (self.block(a, b), self.block(b, a)) else { continue };
                for x in 0..sites {
                    for y in 0..sites {
                        worst = worst.max((p[x * sites + y] - q[y * sites + x].conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// Replaces ρ by `(ρ + ρ†)/2` and returns the largest entry of `ρ - ρ†`
    /// seen before the update.
    pub fn hermitize(&mut self) -> f64 {
        let sites = self.lattice.sites();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                if !self.active[a * n + b] {
                    continue;
                }
                if a == b {
                    let blk = &mut self.blocks[a * n + a];
                    for_tiles(sites, true, |x, y| {
                        let (p, q) = (blk[x * sites + y], blk[y * sites + x]);
                        worst = worst.max((p - q.conj()).norm_sqr());
                        let m = 0.5 * (p + q.conj());
                        blk[x * sites + y] = m;
                        blk[y * sites + x] = m.conj();
                    });
                } else {
                    let (lo, hi) = self.blocks.split_at_mut(b * n + a);
                    let (p, q) = (&mut lo[a * n + b], &mut hi[0]);
                    for_tiles(sites, false, |x, y| {
                        let (u, v) = (p[x * sites + y], q[y * sites + x]);
                        worst = worst.max((u - v.conj()).norm_sqr());
                        let m = 0.5 * (u + v.conj());
                        p[x * sites + y] = m;
                        q[y * sites + x] = m.conj();
                    });
                }
            }
        }
        worst.sqrt()
    }

    /// `ρ v` for a vector indexed by `site·N + a` in the eigenbasis.
    pub fn matvec(&self, v: &[Complex64], out: &mut [Complex64]) {
        let (n, sites) = (self.n, self.lattice.sites());
        out.iter_mut().for_each(|z| *z = ZERO);
        for a in 0..n {
            for b in 0..n {
                let Some(blk) = self.block(a, b) else { continue };
                for x in 0..sites {
                    let row = &blk[x * sites..(x + 1) * sites];
                    let mut acc = ZERO;
                    for (y, r) in row.iter().enumerate() {
                        acc += r * v[y * n + b];
                    }
                    out[x * n + a] += acc;
                }
            }
        }
    }

    /// Smallest eigenvalue: dense for small boxes, Lanczos otherwise.
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.lattice.sites() * self.n;
        if dim <= DENSE_POSITIVITY_LIMIT {
            min_hermitian_eigenvalue(&self.to_dense())
        } else {
            lanczos_min_eigenvalue(dim, LANCZOS_STEPS, |v, w| self.matvec(v, w))
        }
    }
}
