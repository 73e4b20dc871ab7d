//! RK4 evolution of a localized state on a 15² box; prints populations and MSD.

use std::sync::Arc;

use qbm::bath::{BathSpec, RateSource};
use qbm::lindblad::{Alpha, EvolveOptions, LatticeDensityMatrix, assemble, evolve_with};
use qbm::particle::{InternalSystem, PeriodicBox, build_laplacian};
use qbm::{CMatrix, Complex64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bath: Arc<dyn RateSource> = Arc::new(BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?);
    let system = InternalSystem::two_level(1.0)?;
    let generator = assemble(vec![bath], &system, &build_laplacian(2, 2), Alpha::Two, 4)?;
    let lattice = PeriodicBox::new(2, 15)?;
    let mut excited = CMatrix::zeros(2, 2);
    excited[(1, 1)] = Complex64::new(1.0, 0.0);
    let rho0 = LatticeDensityMatrix::localized(&system, lattice, lattice.origin(), &excited)?;

    let dtau = 0.1 / generator.norm_estimate(&lattice);
    let opts = EvolveOptions { record_every: 20, ..EvolveOptions::new(1.5, dtau) };
    let traj = evolve_with(&generator, &rho0, opts)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "tau", "p0", "p1", "msd");
    for o in &traj.observations {
        println!("{:>6.3} {:>10.6} {:>10.6} {:>10.4}", o.tau, o.populations[0], o.populations[1], o.msd);
    }
    println!("min eigenvalue seen: {:.2e}", traj.min_eigenvalue);
    Ok(())
}
