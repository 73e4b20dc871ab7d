use num_complex::Complex64;
use rayon::prelude::*;

use super::generator::LindbladGenerator;
use super::state::LatticeDensityMatrix;
use super::LindbladError;
use crate::particle::PeriodicBox;
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
struct HopTerm {
    /// Hopping block in the eigenbasis.
    block: CMatrix,
    /// `x ↦ x - δ`.
    back: Vec<u32>,
    /// `y ↦ y + δ` as contiguous runs `(dst, src, len)`.
    fwd: Vec<(usize, usize, usize)>,
}

fn runs(map: impl Iterator<Item = usize>) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for (dst, src) in map.enumerate() {
        match out.last_mut() {
            Some((d, s, len)) if *d + *len == dst && *s + *len == src => *len += 1,
            _ => out.push((dst, src, 1)),
        }
    }
    out
}

#[derive(Debug, Clone)]
struct GainTerm {
    /// Nonzero kernel entries as (stencil index, c(δ)).
    kernel: Vec<(usize, Complex64)>,
    /// Per target entry `a·N + b`: sources `c·N + e` with `J[a,c]·conj(J[b,e])`.
    sources: Vec<Vec<(usize, Complex64)>>,
}

/// Precomputed neighbour tables and eigenbasis coefficients for one box.
#[derive(Debug, Clone)]
pub struct ApplyPlan {
    lattice: PeriodicBox,
    n: usize,
    basis: CMatrix,
    hops: Vec<HopTerm>,
    /// `Aρ + ρA†` with `A = -iΥ - ½ Σ c(0,ω) J†J`, grouped per target entry
    /// as (source entry, coefficient).
    local: Vec<Vec<(usize, Complex64)>>,
    /// `x·|stencil| + o ↦ x + δ_o`.
    neighbours: Vec<u32>,
    stencil_len: usize,
    gains: Vec<GainTerm>,
}

fn is_multiple_of_identity(m: &CMatrix) -> bool {
    let d = m[(0, 0)];
    m.iter().enumerate().all(|(k, z)| {
        let (i, j) = (k % m.nrows(), k / m.nrows());
        if i == j { (*z - d).norm() <= 1e-15 } else { z.norm() <= 1e-15 }
    })
}

fn local_terms(a_mat: &CMatrix) -> Vec<Vec<(usize, Complex64)>> {
    let n = a_mat.nrows();
    let mut out = vec![Vec::new(); n * n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = vec![ZERO; n * n];
            for c in 0..n {
                acc[c * n + b] += a_mat[(a, c)];
                acc[a * n + c] += a_mat[(b, c)].conj();
            }
            out[a * n + b] = acc.into_iter().enumerate().filter(|(_, v)| *v != ZERO).collect();
        }
    }
    out
}

impl ApplyPlan {
    pub fn new(generator: &LindbladGenerator, lattice: PeriodicBox) -> Result<Self, LindbladError> {
        if lattice.dim != generator.lattice_dim {
            return Err(LindbladError::Invalid(format!(
                "box dimension {} differs from lattice dimension {}",
                lattice.dim, generator.lattice_dim
            )));
        }
        let reach = generator.r_trunc.max(generator.hopping.as_ref().map_or(0, |h| h.range()));
        if (lattice.side as i64) < 2 * reach + 1 {
            return Err(LindbladError::BoxTooSmall(format!(
                "side {} is below 2·{reach}+1 needed for unambiguous offsets",
                lattice.side
            )));
        }
        let sys = &generator.system;
        let n = sys.dim();
        let sites = lattice.sites();
        let mut hops = Vec::new();
        if let Some(h) = &generator.hopping {
            for (offset, block) in h.blocks() {
                if offset.iter().all(|&c| c == 0) && is_multiple_of_identity(block) {
                    continue;
                }
                let neg: Vec<i64> = offset.iter().map(|c| -c).collect();
                hops.push(HopTerm {
                    block: sys.to_eigenbasis(block),
                    back: (0..sites).map(|x| lattice.shift(x, &neg) as u32).collect(),
                    fwd: runs((0..sites).map(|y| lattice.shift(y, offset))),
                });
            }
        }
        let mut local = generator.lamb.clone() * -I;
        let stencil = PeriodicBox::stencil(lattice.dim, generator.r_trunc);
        let mut gains = Vec::new();
        for ch in &generator.channels {
            let j = sys.to_eigenbasis(&ch.jump);
            let c0 = ch.kernel.origin();
            local -= ch.jump.adjoint() * &ch.jump * Complex64::new(0.5 * c0, 0.0);
            let kernel: Vec<(usize, Complex64)> = ch
                .kernel
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.norm() > 0.0)
                .map(|(o, v)| (o, *v))
                .collect();
            if kernel.is_empty() {
                continue;
            }
            let scale = j.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            let mut sources = vec![Vec::new(); n * n];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for e in 0..n {
                            let coef = j[(a, c)] * j[(b, e)].conj();
                            if coef.norm() > 1e-14 * scale {
                                sources[a * n + b].push((c * n + e, coef));
                            }
                        }
                    }
                }
            }
            gains.push(GainTerm { kernel, sources });
        }
        let neighbours = (0..sites)
            .flat_map(|x| stencil.iter().map(move |o| lattice.shift(x, o) as u32).collect::<Vec<_>>())
            .collect();
        Ok(Self {
            lattice,
            n,
            basis: sys.eigenvectors().clone(),
            hops,
            local: local_terms(&sys.to_eigenbasis(&local)),
            neighbours,
            stencil_len: stencil.len(),
            gains,
        })
    }

    pub fn lattice(&self) -> PeriodicBox {
        self.lattice
    }

    /// Writes `L♮ρ` into `out`, which must share the layout of `rho`.
    pub fn apply_into(&self, rho: &LatticeDensityMatrix, out: &mut LatticeDensityMatrix) -> Result<(), LindbladError> {
        if rho.lattice() != self.lattice || !rho.same_layout(out) || rho.basis() != &self.basis {
            return Err(LindbladError::Incompatible);
        }
        let n = self.n;
        let sites = self.lattice.sites();
        let src = rho.blocks();
        let active = rho.active();
        for (target, out_blk) in out.blocks_mut().iter_mut().enumerate() {
            if out_blk.is_empty() {
                continue;
            }
            let (a, b) = (target / n, target % n);
            out_blk.par_chunks_mut(sites).enumerate().for_each(|(x, row)| {
                row.iter_mut().for_each(|z| *z = ZERO);
                for hop in &self.hops {
                    let xs = hop.back[x] as usize;
                    for c in 0..n {
                        let k = hop.block[(a, c)];
                        if k != ZERO && active[c * n + b] {
                            let f = -I * k;
                            let s = &src[c * n + b][xs * sites..(xs + 1) * sites];
                            row.iter_mut().zip(s).for_each(|(r, v)| *r += f * v);
                        }
                        let k = hop.block[(c, b)];
                        if k != ZERO && active[a * n + c] {
                            let f = I * k;
                            let s = &src[a * n + c][x * sites..(x + 1) * sites];
                            for &(d, from, len) in &hop.fwd {
                                row[d..d + len].iter_mut().zip(&s[from..from + len]).for_each(|(r, v)| *r += f * v);
                            }
                        }
                    }
                }
                for &(entry, coef) in &self.local[target] {
                    if active[entry] {
                        let s = &src[entry][x * sites..(x + 1) * sites];
                        row.iter_mut().zip(s).for_each(|(r, v)| *r += coef * v);
                    }
                }
                let nbr = &self.neighbours[x * self.stencil_len..(x + 1) * self.stencil_len];
                for g in &self.gains {
                    let terms: Vec<&(usize, Complex64)> =
                        g.sources[target].iter().filter(|(s, _)| active[*s]).collect();
                    if terms.is_empty() {
                        continue;
                    }
                    for &(o, cv) in &g.kernel {
                        let y = nbr[o] as usize;
                        let mut acc = ZERO;
                        for &&(s, coef) in &terms {
                            acc += coef * src[s][x * sites + y];
                        }
                        row[y] += cv * acc;
                    }
                }
            });
        }
        Ok(())
    }

    pub fn apply(&self, rho: &LatticeDensityMatrix) -> Result<LatticeDensityMatrix, LindbladError> {
        let mut out = LatticeDensityMatrix::zeros_like(rho);
        self.apply_into(rho, &mut out)?;
        Ok(out)
    }
}

impl LindbladGenerator {
    pub fn plan(&self, lattice: PeriodicBox) -> Result<ApplyPlan, LindbladError> {
        ApplyPlan::new(self, lattice)
    }

    /// One-shot `L♮ρ`; builds a fresh plan.
    pub fn apply(&self, rho: &LatticeDensityMatrix) -> Result<LatticeDensityMatrix, LindbladError> {
        self.plan(rho.lattice())?.apply(rho)
    }
}
