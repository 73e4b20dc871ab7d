use serde::Serialize;

use super::density::{MomentumDensity, MomentumGrid};
use super::rates::JumpRates;
use super::KineticError;

/// Most negative value tolerated before the integration is aborted.
const NEGATIVITY_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone)]
struct RingTerm {
    from: usize,
    to: usize,
    rate: f64,
    /// Cell offsets `k' - k` on the ring.
    shifts: Vec<Vec<i64>>,
    /// `idx·|ring| + j ↦` flat index of `idx - shifts[j]`.
    sources: Vec<u32>,
}

/// Discretised forward generator of the momentum-space jump process.
#[derive(Debug, Clone)]
pub struct MasterOperator {
    grid: MomentumGrid,
    levels: usize,
    terms: Vec<RingTerm>,
    exit: Vec<f64>,
}

/// Cells `m` with `| |m|Δ - radius | ≤ Δ/2`, all with equal weight.
fn ring(grid: &MomentumGrid, radius: f64) -> Vec<Vec<i64>> {
    let d = grid.spacing();
    let reach = (radius / d).ceil() as i64 + 1;
    let mut out = vec![Vec::new()];
    for _ in 0..grid.dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (-reach..=reach).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out.retain(|m| {
        let len = m.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt() * d;
        (len - radius).abs() <= 0.5 * d
    });
    out
}

impl MasterOperator {
    pub fn new(rates: &JumpRates, grid: MomentumGrid) -> Result<Self, KineticError> {
        if grid.dim != rates.dim {
            return Err(KineticError::Invalid(format!(
                "grid dimension {} differs from bath dimension {}",
                grid.dim, rates.dim
            )));
        }
        if let Some(r) = rates.min_radius() {
            let required = 16.0 * std::f64::consts::PI / r;
            if (grid.m as f64) < required {
                return Err(KineticError::GridTooCoarse { m: grid.m, required });
            }
        }
        let terms = rates
            .transitions
            .iter()
            .map(|t| {
                let shifts = ring(&grid, t.radius);
                let sources = (0..grid.points())
                    .flat_map(|idx| {
                        let cells = grid.unflatten(idx);
                        shifts
                            .iter()
                            .map(|sh| {
                                let from: Vec<i64> = cells.iter().zip(sh).map(|(c, s)| *c as i64 - s).collect();
                                grid.flatten(&from) as u32
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                RingTerm { from: t.from, to: t.to, rate: t.rate, shifts, sources }
            })
            .collect();
        let exit = (0..rates.levels()).map(|s| rates.exit_rate(s)).collect();
        Ok(Self { grid, levels: rates.levels(), terms, exit })
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn ring_sizes(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.shifts.len()).collect()
    }

    /// `∂_τ ρ` written into `out`.
    pub fn derivative_into(&self, rho: &MomentumDensity, out: &mut MomentumDensity) {
        let p = self.grid.points();
        for s in 0..self.levels {
            let exit = self.exit[s];
            for (o, v) in out.values[s * p..(s + 1) * p].iter_mut().zip(rho.level(s)) {
                *o = -exit * v;
            }
        }
        for t in &self.terms {
            let w = t.rate / t.shifts.len() as f64;
            let src = rho.level(t.from);
            let dst = &mut out.values[t.to * p..(t.to + 1) * p];
            let len = t.shifts.len();
            for (d, nbrs) in dst.iter_mut().zip(t.sources.chunks(len)) {
                let acc: f64 = nbrs.iter().map(|&j| src[j as usize]).sum();
                *d += w * acc;
            }
        }
    }

    pub fn derivative(&self, rho: &MomentumDensity) -> MomentumDensity {
        let mut out = MomentumDensity::zeros(self.grid, self.levels);
        self.derivative_into(rho, &mut out);
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MasterRecord {
    pub tau: f64,
    pub mass_drift: f64,
    pub level_marginals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MasterTrajectory {
    pub records: Vec<MasterRecord>,
    pub snapshots: Vec<(f64, MomentumDensity)>,
    pub final_density: MomentumDensity,
    pub steps: usize,
    pub dtau: f64,
}

/// RK4 integration; a snapshot of the full density is stored every
/// `snapshot_every` steps (0 keeps only the final density).
pub fn evolve_master(
    rates: &JumpRates,
    rho0: &MomentumDensity,
    tau_final: f64,
    dtau: f64,
    snapshot_every: usize,
) -> Result<MasterTrajectory, KineticError> {
    if rho0.levels != rates.levels() {
        return Err(KineticError::Invalid("density and rates have different level counts".into()));
    }
    if !(dtau > 0.0) || !(tau_final >= 0.0) {
        return Err(KineticError::Invalid("need dτ > 0 and τ_final ≥ 0".into()));
    }
    let op = MasterOperator::new(rates, rho0.grid)?;
    let steps = (tau_final / dtau - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { tau_final / steps as f64 };
    let mass0 = rho0.total_mass();
    let mut rho = rho0.clone();
    let mut k = MomentumDensity::zeros(rho0.grid, rho0.levels);
    let mut stage = rho.clone();
    let mut acc = rho.clone();
    let record = |rho: &MomentumDensity, tau: f64| MasterRecord {
        tau,
        mass_drift: rho.total_mass() - mass0,
        level_marginals: rho.level_marginals(),
    };
    let mut records = vec![record(&rho, 0.0)];
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push((0.0, rho.clone()));
    }
    for step in 1..=steps {
        let tau = step as f64 * h;
        op.derivative_into(&rho, &mut k);
        for ((a, s), (r, d)) in acc.values.iter_mut().zip(stage.values.iter_mut()).zip(rho.values.iter().zip(&k.values)) {
            *a = r + h / 6.0 * d;
            *s = r + h / 2.0 * d;
        }
        for (coef, next) in [(h / 3.0, h / 2.0), (h / 3.0, h), (h / 6.0, 0.0)] {
            op.derivative_into(&stage, &mut k);
            for ((a, s), (r, d)) in
                acc.values.iter_mut().zip(stage.values.iter_mut()).zip(rho.values.iter().zip(&k.values))
            {
                *a += coef * d;
                *s = r + next * d;
            }
        }
        std::mem::swap(&mut rho, &mut acc);
        let min = rho.min_value();
        if min < NEGATIVITY_FLOOR {
            return Err(KineticError::NegativeDensity { value: min, tau });
        }
        records.push(record(&rho, tau));
        if snapshot_every > 0 && step % snapshot_every == 0 {
            snapshots.push((tau, rho.clone()));
        }
    }
    Ok(MasterTrajectory { records, snapshots, final_density: rho, steps, dtau: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rings_are_symmetric_and_centred() {
        let g = MomentumGrid::new(2, 64).unwrap();
        let r = ring(&g, 1.0);
        for m in &r {
            let neg: Vec<i64> = m.iter().map(|c| -c).collect();
            assert!(r.contains(&neg));
        }
        let mean: f64 = r.iter().map(|m| m.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()).sum::<f64>()
            / r.len() as f64
            * g.spacing();
        assert!((mean - 1.0).abs() < 0.5 * g.spacing());
        let g1 = MomentumGrid::new(1, 64).unwrap();
        assert_eq!(ring(&g1, 1.0).len(), 2);
    }
}
