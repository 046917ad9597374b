//! Diffusion with curvature-dependent coefficient `a = 1/(1+κ)` on an ellipse,
//! compared with a spectral solve in arclength.

use cpmol::problems::{ProblemKind, ProblemSpec};

fn main() -> cpmol::Result<()> {
    let spec = ProblemSpec::new(ProblemKind::CurvdiffEllipse);
    let study = spec.converge(&[0.1, 0.05, 0.025])?;
    for r in &study.reports {
        println!("dx {:<6} dt {:<8.4} max_err {:.4e}", r.dx, r.dt, r.max_err);
    }
    println!("fitted order {:.3}", study.slope.unwrap_or(f64::NAN));
    Ok(())
}
