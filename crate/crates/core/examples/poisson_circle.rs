//! Poisson problem on the unit circle. The Laplace–Beltrami
//! operator is singular, so the system is bordered with a mean-zero constraint.

use cpmol::problems::{ProblemKind, ProblemSpec};

fn main() -> cpmol::Result<()> {
    let study = ProblemSpec::new(ProblemKind::PoissonCircle).converge(&[0.1, 0.05, 0.025])?;
    for r in &study.reports {
        println!("dx {:<6} max_err {:.4e}", r.dx, r.max_err);
    }
    println!("fitted order {:.3}", study.slope.unwrap_or(f64::NAN));
    Ok(())
}
