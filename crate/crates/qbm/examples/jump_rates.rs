//! Rate kernel c(x, ω), Lamb-shift weight and detailed balance for one bath.

use qbm::bath::{BathSpec, lamb_shift_weight, rate};
use qbm::kinetic::build_rates;
use qbm::particle::InternalSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta = 1.0;
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(beta))?;
    for omega in [-1.0, 1.0] {
        for x in [[0, 0], [1, 0], [2, 1]] {
            let c = rate(&spec, &x, omega)?;
            println!("c({x:?}, {omega:+}) = {:.6e}", c.re);
        }
        let lamb = lamb_shift_weight(&spec, omega)?;
        println!("Lamb weight at {omega:+}: {:.6e} (residual {:.1e})", lamb.value, lamb.residual);
    }

    let jumps = build_rates(&[spec], &InternalSystem::two_level(1.0)?)?;
    let ratio = jumps.rate(1, 0) / jumps.rate(0, 1);
    println!("Γ(+→−)/Γ(−→+) = {ratio:.8}, e^βε = {:.8}", beta.exp());
    Ok(())
}
