//! Smallest κ in the exponential propagation bound for the free hopping.

use qbm::particle::{InternalSystem, PeriodicBox, build_laplacian, propagation_bound_scan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = InternalSystem::two_level(1.0)?;
    let hopping = build_laplacian(1, 2);
    let times = [0.5, 1.0, 2.0, 3.0];
    for side in [41, 61] {
        let scan = propagation_bound_scan(&hopping, &system, 1.0, 0.0, &times, &PeriodicBox::new(1, side)?)?;
        println!("box {side}: κ = {:.5}  per time {:.4?}", scan.kappa, scan.per_time);
    }
    Ok(())
}
