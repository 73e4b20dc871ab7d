//! Time average of e^{-itS}·A·e^{itS} approaching the spectral average as 1/t.

use qbm::CMatrix;
use qbm::dyson::spectral_average_check;
use qbm::particle::{InternalSystem, sigma_x};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = InternalSystem::two_level(1.5)?;
    // Left multiplication by σ_x on column-stacked 2×2 matrices.
    let a = CMatrix::identity(2, 2).kronecker(&sigma_x());
    let table = spectral_average_check(&a, &system, &[10.0, 100.0, 1000.0])?;
    for r in &table.rows {
        println!("t={:>7} deviation {:.3e}  t·deviation {:.3}", r.t, r.deviation, r.t * r.deviation);
    }
    Ok(())
}
