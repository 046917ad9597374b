//! Fourth-order flow `u_t = −Δ²u` on the unit circle, integrated implicitly.

use cpmol::problems::{ProblemKind, ProblemSpec};

fn main() -> cpmol::Result<()> {
    let spec = ProblemSpec::new(ProblemKind::BiharmonicCircle);
    let study = spec.converge(&[0.2, 0.1, 0.05])?;
    for (i, r) in study.reports.iter().enumerate() {
        let order = if i > 0 {
            format!("{:.2}", study.orders[i - 1])
        } else {
            "-".into()
        };
        println!("dx {:<5} max_err {:.4e} order {order}", r.dx, r.max_err);
    }
    Ok(())
}
