//! Momentum-space master equation relaxing to the Gibbs level populations.

use qbm::bath::BathSpec;
use qbm::kinetic::{MomentumDensity, MomentumGrid, build_rates, evolve_master};
use qbm::particle::InternalSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta = 1.0;
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(beta))?;
    let jumps = build_rates(&[spec], &InternalSystem::two_level(1.0)?)?;
    let grid = MomentumGrid::new(2, 64)?;
    let rho0 = MomentumDensity::point(grid, 2, grid.flatten(&[32, 32]), 1);
    let traj = evolve_master(&jumps, &rho0, 5.0, 0.01, 0)?;
    for rec in traj.records.iter().step_by(50) {
        println!("τ={:>5.2}  levels {:.5?}  mass drift {:.1e}", rec.tau, rec.level_marginals, rec.mass_drift);
    }
    let z: f64 = jumps.energies.iter().map(|e| (-beta * e).exp()).sum();
    let gibbs: Vec<f64> = jumps.energies.iter().map(|e| (-beta * e).exp() / z).collect();
    println!("Gibbs {gibbs:.5?}");
    Ok(())
}
