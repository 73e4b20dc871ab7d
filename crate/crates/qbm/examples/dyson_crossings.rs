//! Wick pairings and crossing suppression on a five-site ring.

use qbm::bath::{BathSpec, Dispersion, FormFactor, Occupation};
use qbm::dyson::{DysonBox, QuadratureGrid, crossing_suppression_scan, enumerate_pairings};
use qbm::particle::{InternalSystem, PeriodicBox, build_laplacian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in enumerate_pairings(2)? {
        println!("{p:?} ladder={}", p.is_ladder());
    }

    let bath = BathSpec::new(
        "ring",
        1,
        Dispersion::Linear,
        FormFactor::AcousticBump { amplitude: 0.04 },
        Occupation::BoseEinstein { beta: 1.0 },
        1.0,
    )?;
    let ring = PeriodicBox::new(1, 5)?;
    let system = DysonBox::with_bath_side(ring, InternalSystem::two_level(1.5)?, build_laplacian(1, 2), bath, 1.0, 24)?;
    let scan = crossing_suppression_scan(&system, &[0.5, 0.35], 0.5, QuadratureGrid::default())?;
    for row in &scan.rows {
        println!("λ={:.2} t={:>5.2} ladder {:.3e} crossings {:.3e} ratio {:.3}", row.lambda, row.time, row.ladder_norm, row.crossing_norm, row.ratio);
    }
    Ok(())
}
