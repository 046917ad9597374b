//! Mean curvature from the closest point function on an ellipse and a sphere.

use cpmol::cli::curvature_check;
use cpmol::prelude::*;

fn main() -> cpmol::Result<()> {
    for (name, surface, dx) in [
        ("ellipse 2x1", Surface::ellipse(2.0, 1.0), 0.05),
        (
            "sphere r=2",
            Surface::sphere(Point::new3(0.0, 0.0, 0.0), 2.0),
            0.1,
        ),
    ] {
        let rows = curvature_check(&surface, dx, 3)?;
        let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.abs_err));
        println!(
            "{name:<12} dx {dx:<5} samples {:<6} max |κ − κ_exact| {worst:.3e}",
            rows.len()
        );
    }
    Ok(())
}
