//! Largest stable forward Euler step for `u_t = Δu − u` on the unit circle as the
//! penalty grows, next to the `2/γ` estimate.

use cpmol::cli::stability_scan;
use cpmol::prelude::*;

fn main() -> cpmol::Result<()> {
    let dx = 0.1;
    let gammas: Vec<f64> = [2.0, 4.0, 8.0, 40.0, 400.0]
        .iter()
        .map(|g| g / (dx * dx))
        .collect();
    println!("{:>8} {:>12} {:>12}", "γdx²", "observed", "2/γ");
    for r in stability_scan(&gammas, dx, Scheme::ForwardEuler, 3)? {
        println!(
            "{:>8.1} {:>12.4e} {:>12.4e}",
            r.gamma * dx * dx,
            r.dt_max_observed,
            r.dt_predicted
        );
    }
    Ok(())
}
