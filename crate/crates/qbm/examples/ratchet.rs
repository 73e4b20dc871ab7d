//! Directed current of the four-level ratchet with one cold and one warm bath.

use qbm::kinetic::{RatchetConfig, ratchet_current};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (label, cold, swap) in [("T₁ = T₂", Some(1.0), false), ("T₁ = 0", None, false), ("T₁ = 0, swapped", None, true)] {
        let mut cfg = RatchetConfig::preset(1.0, cold, Some(1.0))?;
        cfg.swap_couplings = swap;
        cfg.tau_final = 8.0;
        let out = ratchet_current(&cfg)?;
        println!("{label:<16} v = {:+.4e} ± {:.1e}", out.velocity, out.stderr);
    }
    Ok(())
}
