use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::density::MomentumDensity;
use super::rates::JumpRates;
use super::KineticError;

#[derive(Debug, Clone, Serialize)]
pub struct JumpEvent {
    pub tau: f64,
    pub k: Vec<f64>,
    pub level: usize,
}

/// Jump history; the first event is the initial state at τ = 0.
#[derive(Debug, Clone, Serialize)]
pub struct JumpTrajectory {
    pub events: Vec<JumpEvent>,
    /// End of the simulated window.
    pub tau_end: f64,
}

impl JumpTrajectory {
    /// State occupied at time `tau`.
    pub fn state_at(&self, tau: f64) -> &JumpEvent {
        let i = self.events.partition_point(|e| e.tau <= tau);
        &self.events[i.saturating_sub(1)]
    }

    pub fn jumps(&self) -> usize {
        self.events.len() - 1
    }

    /// Fraction of `[0, tau_end]` spent in each level.
    pub fn time_fractions(&self, levels: usize) -> Vec<f64> {
        let mut out = vec![0.0; levels];
        for (i, e) in self.events.iter().enumerate() {
            let next = self.events.get(i + 1).map_or(self.tau_end, |n| n.tau);
            out[e.level] += next - e.tau;
        }
        out.iter_mut().for_each(|v| *v /= self.tau_end);
        out
    }
}

fn wrap(k: f64) -> f64 {
    (k + PI).rem_euclid(2.0 * PI) - PI
}

fn sphere_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| radius * x / n).collect();
        }
    }
}

/// Deterministic per-trajectory generator: `seed` selects the key and
/// `stream` the trajectory.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Stepper<'a> {
    rates: &'a JumpRates,
    rng: ChaCha8Rng,
}

impl Stepper<'_> {
    /// Waiting time and next state, or `None` when no transition is possible.
    fn next(&mut self, k: &[f64], level: usize) -> Option<(f64, Vec<f64>, usize)> {
        let total = self.rates.exit_rate(level);
        if total <= 0.0 {
            return None;
        }
        let wait = Exp::new(total).expect("positive rate").sample(&mut self.rng);
        let mut pick = self.rng.random::<f64>() * total;
        let mut chosen = None;
        for t in self.rates.outgoing(level) {
            chosen = Some(t);
            if pick < t.rate {
                break;
            }
            pick -= t.rate;
        }
        let t = chosen.expect("positive exit rate implies a transition");
        let q = sphere_point(&mut self.rng, k.len(), t.radius);
        let gain = self.rates.energies[t.to] - self.rates.energies[t.from];
        // Absorption adds the boson momentum, emission removes it.
        let sign = if gain > 0.0 { 1.0 } else { -1.0 };
        let k_new: Vec<f64> = k.iter().zip(&q).map(|(a, b)| wrap(a + sign * b)).collect();
        let q_norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((q_norm - gain.abs()).abs() <= 1e-12 * (1.0 + gain.abs()), "kick does not match ΔE");
        for ((a, b), qi) in k.iter().zip(&k_new).zip(&q) {
            assert!(wrap(sign * (b - a) - qi).abs() <= 1e-9, "momentum bookkeeping violated");
        }
        Some((wait, k_new, t.to))
    }
}

/// One trajectory on `[0, tau_max]` from `(k0, s0)`.
pub fn gillespie(
    rates: &JumpRates,
    k0: &[f64],
    s0: usize,
    tau_max: f64,
    seed: u64,
    stream: u64,
) -> Result<JumpTrajectory, KineticError> {
    check_start(rates, k0, s0)?;
    let mut stepper = Stepper { rates, rng: stream_rng(seed, stream) };
    let mut events = vec![JumpEvent { tau: 0.0, k: k0.iter().map(|&x| wrap(x)).collect(), level: s0 }];
    let mut tau = 0.0;
    loop {
        let last = events.last().unwrap();
        let Some((wait, k, level)) = stepper.next(&last.k, last.level) else { break };
        tau += wait;
        if tau > tau_max {
            break;
        }
        events.push(JumpEvent { tau, k, level });
    }
    Ok(JumpTrajectory { events, tau_end: tau_max })
}

/// One trajectory of exactly `jumps` transitions (fewer if absorbed).
pub fn gillespie_jumps(
    rates: &JumpRates,
    k0: &[f64],
    s0: usize,
    jumps: usize,
    seed: u64,
) -> Result<JumpTrajectory, KineticError> {
    check_start(rates, k0, s0)?;
    let mut stepper = Stepper { rates, rng: stream_rng(seed, 0) };
    let mut events = vec![JumpEvent { tau: 0.0, k: k0.to_vec(), level: s0 }];
    let mut tau = 0.0;
    for _ in 0..jumps {
        let last = events.last().unwrap();
        let Some((wait, k, level)) = stepper.next(&last.k, last.level) else { break };
        tau += wait;
        events.push(JumpEvent { tau, k, level });
    }
    Ok(JumpTrajectory { events, tau_end: tau })
}

fn check_start(rates: &JumpRates, k0: &[f64], s0: usize) -> Result<(), KineticError> {
    if k0.len() != rates.dim || s0 >= rates.levels() {
        return Err(KineticError::Invalid(format!(
            "start ({k0:?}, {s0}) does not fit d={} with {} levels",
            rates.dim,
            rates.levels()
        )));
    }
    Ok(())
}

/// States at `tau` of `n_traj` independent trajectories; trajectory `i` uses
/// stream `i`, so results do not depend on the thread count.
pub fn ensemble(
    rates: &JumpRates,
    k0: &[f64],
    s0: usize,
    tau: f64,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<JumpEvent>, KineticError> {
    check_start(rates, k0, s0)?;
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let traj = gillespie(rates, k0, s0, tau, seed, i as u64)?;
            Ok(traj.state_at(tau).clone())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TvReport {
    pub level: f64,
    /// Per-axis momentum marginals.
    pub axes: Vec<f64>,
    pub bins: usize,
    pub max: f64,
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total-variation distances between ensemble and master marginals. Momentum
/// bins are unions of `M / bins` grid cells.
pub fn tv_against_master(
    samples: &[JumpEvent],
    master: &MomentumDensity,
    bins: usize,
) -> Result<TvReport, KineticError> {
    let grid = master.grid;
    if bins == 0 || !grid.m.is_multiple_of(bins) || samples.is_empty() {
        return Err(KineticError::Invalid(format!("{bins} bins do not divide M={}", grid.m)));
    }
    let n = samples.len() as f64;
    let mut levels = vec![0.0; master.levels];
    for s in samples {
        levels[s.level] += 1.0 / n;
    }
    let level = tv(&levels, &master.level_marginals());
    let per = grid.m / bins;
    let axes: Vec<f64> = (0..grid.dim)
        .map(|a| {
            let mut hist = vec![0.0; bins];
            for s in samples {
                hist[grid.cell_of(s.k[a]) / per] += 1.0 / n;
            }
            tv(&hist, &master.axis_marginal(a, bins))
        })
        .collect();
    let max = axes.iter().copied().fold(level, f64::max);
    Ok(TvReport { level, axes, bins, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use crate::kinetic::build_rates;
    use crate::particle::InternalSystem;

    fn rates() -> JumpRates {
        let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0)).unwrap();
        build_rates(&[spec], &InternalSystem::two_level(1.0).unwrap()).unwrap()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let r = rates();
        let a = gillespie(&r, &[0.0, 0.0], 1, 5.0, 7, 3).unwrap();
        let b = gillespie(&r, &[0.0, 0.0], 1, 5.0, 7, 3).unwrap();
        let c = gillespie(&r, &[0.0, 0.0], 1, 5.0, 7, 4).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        assert_eq!(a.events.last().unwrap().k, b.events.last().unwrap().k);
        assert_ne!(a.events[1].tau, c.events[1].tau);
    }

    #[test]
    fn jumps_alternate_and_kicks_match_the_gap() {
        let r = rates();
        let traj = gillespie_jumps(&r, &[0.1, -0.2], 0, 200, 1).unwrap();
        for w in traj.events.windows(2) {
            assert_ne!(w[0].level, w[1].level);
            assert!(w[1].tau > w[0].tau);
        }
    }

    #[test]
    fn zero_hamiltonian_never_jumps() {
        let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0)).unwrap();
        let sys = InternalSystem::new(crate::CMatrix::zeros(2, 2), vec![crate::particle::sigma_x()]).unwrap();
        let r = build_rates(&[spec], &sys).unwrap();
        let traj = gillespie(&r, &[0.3, 0.3], 0, 100.0, 1, 0).unwrap();
        assert_eq!(traj.jumps(), 0);
        assert!(traj.state_at(50.0).k.iter().all(|k| (k - 0.3).abs() < 1e-12));
    }

    #[test]
    fn state_lookup() {
        let r = rates();
        let traj = gillespie(&r, &[0.0, 0.0], 1, 3.0, 2, 0).unwrap();
        assert_eq!(traj.state_at(0.0).level, 1);
        let e = &traj.events[traj.events.len() - 1];
        assert_eq!(traj.state_at(3.0).tau, e.tau);
    }
}
