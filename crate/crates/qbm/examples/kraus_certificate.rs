//! Positivity certificate of the lattice Lindblad generator.

use std::sync::Arc;

use qbm::bath::{BathSpec, RateSource};
use qbm::lindblad::{Alpha, assemble, kraus_certificate};
use qbm::particle::{InternalSystem, build_laplacian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bath: Arc<dyn RateSource> = Arc::new(BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?);
    let system = InternalSystem::two_level(1.0)?;
    let generator = assemble(vec![bath], &system, &build_laplacian(2, 2), Alpha::Two, 6)?;
    let report = kraus_certificate(&generator)?;
    for ch in &report.channels {
        println!(
            "{} ω={:+.2} R={} points={} min eigenvalue {:.2e}",
            ch.bath, ch.omega, ch.stencil_radius, ch.points, ch.min_eigenvalue
        );
    }
    println!("Lamb shift: asymmetry {:.1e}, [Υ, S] {:.1e}", report.lamb_asymmetry, report.lamb_commutator);
    println!("pass: {}", report.pass);
    Ok(())
}
