//! Heat equation on the unit sphere with BDF2 and the iterative solver.

use cpmol::problems::{ProblemKind, ProblemSpec};

fn main() -> cpmol::Result<()> {
    let study = ProblemSpec::new(ProblemKind::HeatSphere).converge(&[0.2, 0.1])?;
    for r in &study.reports {
        println!(
            "dx {:<6} samples {:<6} max_err {:.4e}",
            r.dx, r.samples, r.max_err
        );
    }
    println!("fitted order {:.3}", study.slope.unwrap_or(f64::NAN));
    Ok(())
}
