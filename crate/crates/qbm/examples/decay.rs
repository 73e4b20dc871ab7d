//! Envelope decay of the d = 2 acoustic bath correlation.

use qbm::bath::{BathSpec, Dispersion, FormFactor, Occupation, decay_profile, fit_decay};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BathSpec::new(
        "acoustic",
        2,
        Dispersion::Linear,
        FormFactor::AcousticBump { amplitude: 1.0 },
        Occupation::BoseEinstein { beta: 1.0 },
        3.0,
    )?;
    let times: Vec<f64> = (0..8).map(|i| 10.0 * 4f64.powf(i as f64 / 7.0)).collect();
    let rows = decay_profile(&spec, &times, 45)?;
    for r in &rows {
        println!("t={:>6.2} |x|≥t/2 sup {:.3e}  |x|<t/2 max {:.3e}", r.t, r.outer_sup, r.inner_max);
    }
    let fit = fit_decay(&rows, 10.0, 40.0);
    println!("exponents: outer {:.3}, inner {:.3}", fit.outer.slope, fit.inner.slope);
    Ok(())
}
