use serde::Serialize;

use super::ParticleError;

/// Periodic box `(ℤ/side)^dim` with centred coordinates in `(-side/2, side/2]`
/// (so 31 sites run from -15 to 15). Sites are numbered lexicographically with
/// the first axis slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PeriodicBox {
    pub dim: usize,
    pub side: usize,
}

impl PeriodicBox {
    pub fn new(dim: usize, side: usize) -> Result<Self, ParticleError> {
        if dim == 0 || side == 0 {
            return Err(ParticleError::InvalidBox(format!("dimension {dim} and side {side} must be positive")));
        }
        Ok(Self { dim, side })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn lo(&self) -> i64 {
        -((self.side as i64 - 1) / 2)
    }

    /// Representative of `v` modulo `side` in the centred range.
    pub fn wrap(&self, v: i64) -> i64 {
        let n = self.side as i64;
        (v - self.lo()).rem_euclid(n) + self.lo()
    }

    pub fn coords(&self, site: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        let mut rem = site;
        for a in (0..self.dim).rev() {
            out[a] = (rem % self.side) as i64 + self.lo();
            rem /= self.side;
        }
        out
    }

    pub fn site(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.side + (self.wrap(c) - self.lo()) as usize)
    }

    pub fn origin(&self) -> usize {
        self.site(&vec![0; self.dim])
    }

    /// Site reached from `site` by the lattice vector `offset`.
    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let c: Vec<i64> = self.coords(site).iter().zip(offset).map(|(a, b)| a + b).collect();
        self.site(&c)
    }

    /// Minimum-image representative of the displacement `to - from`.
    pub fn displacement(&self, from: usize, to: usize) -> Vec<i64> {
        let (a, b) = (self.coords(from), self.coords(to));
        a.iter().zip(&b).map(|(x, y)| self.wrap(y - x)).collect()
    }

    /// Offsets `δ` with `|δ|∞ ≤ radius`, in lexicographic order.
    pub fn stencil(dim: usize, radius: i64) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::new()];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (-radius..=radius).map(move |c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Largest coordinate magnitude present on the box.
    pub fn edge(&self) -> i64 {
        self.side as i64 / 2
    }

    /// Whether a site lies on the outermost shell `max_i |x_i| = edge`.
    pub fn on_boundary(&self, site: usize) -> bool {
        self.coords(site).iter().any(|c| c.abs() >= self.edge())
    }
}

pub fn sup_norm(v: &[i64]) -> i64 {
    v.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn euclidean(v: &[i64]) -> f64 {
    v.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
}
