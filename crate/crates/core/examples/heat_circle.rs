//! Heat equation on the unit circle with forward Euler, over four grids.
//!
//! Run with `cargo run --release --example heat_circle`.

use cpmol::problems::{ProblemKind, ProblemSpec};

fn main() -> cpmol::Result<()> {
    let spec = ProblemSpec::new(ProblemKind::HeatCircle);
    let study = spec.converge(&[0.2, 0.1, 0.05, 0.025])?;
    println!("{:>8} {:>10} {:>12}", "dx", "dt", "max_err");
    for r in &study.reports {
        println!("{:>8} {:>10.3e} {:>12.4e}", r.dx, r.dt, r.max_err);
    }
    println!("fitted order {:.3}", study.slope.unwrap_or(f64::NAN));
    Ok(())
}
