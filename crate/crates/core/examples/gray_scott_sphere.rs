//! Gray–Scott spots on the unit sphere; writes CSV and VTK snapshots to
//! `gray_scott_out/`. The larger perturbation amplitude is what seeds a pattern.

use std::path::Path;

use cpmol::cli::{cmd_simulate, RunManifest, SimulateOptions};
use cpmol::problems::ProblemKind;

fn main() -> cpmol::Result<()> {
    let mut o = SimulateOptions::new(ProblemKind::GrayScott, 0.2)?;
    o.p = 2;
    o.t_end = 1000.0;
    o.amplitude = 0.5;
    o.seed = 11;
    let sim = cmd_simulate(
        &o,
        Path::new("gray_scott_out"),
        RunManifest::new("example").seed(o.seed),
    )?;
    for s in &sim.snapshots {
        let v = &s.fields[1];
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        println!("t {:>7.1}  max v {hi:.4}", s.t);
    }
    Ok(())
}
