//! Bath correlation f(x, t) for a thermal smooth-bump bath in d = 2.

use qbm::bath::{BathSpec, correlation, correlation_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = BathSpec::smooth_bump(2, 3.0, 1.0, Some(1.0))?;
    let points = vec![vec![0, 0], vec![1, 0], vec![3, 2]];
    let times = [0.0, 1.0, 4.0, 16.0];
    let table = correlation_table(&spec, &points, &times)?;
    for (p, x) in points.iter().enumerate() {
        for (j, t) in times.iter().enumerate() {
            let f = table.values[p * times.len() + j];
            println!("x={x:?} t={t:>5}  f = {:+.6e} {:+.6e}i", f.re, f.im);
        }
    }
    // f(x, t)* = f(-x, -t)
    let f = correlation(&spec, &[3, 2], 4.0)?;
    let g = correlation(&spec, &[-3, -2], -4.0)?;
    println!("hermiticity defect {:.2e}", (f.conj() - g).norm());
    Ok(())
}
