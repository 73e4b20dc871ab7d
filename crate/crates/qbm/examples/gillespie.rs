//! Exact jump-process sampling checked against the master equation.

use qbm::bath::BathSpec;
use qbm::kinetic::{
    MomentumDensity, MomentumGrid, build_rates, ensemble, evolve_master, gillespie_jumps, tv_against_master,
};
use qbm::particle::InternalSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?;
    let jumps = build_rates(&[spec], &InternalSystem::two_level(1.0)?)?;

    let path = gillespie_jumps(&jumps, &[0.0, 0.0], 1, 20, 5)?;
    for e in &path.events {
        println!("τ={:>8.4} level {} k=({:+.3}, {:+.3})", e.tau, e.level, e.k[0], e.k[1]);
    }

    let tau = 5.0;
    let grid = MomentumGrid::new(2, 64)?;
    let rho0 = MomentumDensity::point(grid, 2, grid.index_of(&[0.0, 0.0]), 1);
    let master = evolve_master(&jumps, &rho0, tau, 0.01, 0)?;
    let samples = ensemble(&jumps, &[0.0, 0.0], 1, tau, 10_000, 2024)?;
    let tv = tv_against_master(&samples, &master.final_density, 4)?;
    println!("TV level {:.4}, axes {:.4?}, max {:.4}", tv.level, tv.axes, tv.max);
    Ok(())
}
